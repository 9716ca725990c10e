"""The live session service, driven in-process (no HTTP needed).

A session pits a human player against the same task-assignment machinery
the training harness uses. Three conditions: NoTutorial (fixed hardest
task), ExpertOrdered (a fixed easy-to-hard ladder), and HapAdaptive (the
logit teacher reacting to your successes and failures). Every event is a
JSON line; a session replays byte-for-byte from its export.
"""

import json

from hap.service import Session, SessionStore, wire_dumps

# -- a short adaptive session -------------------------------------------------

session = Session("demo", "HapAdaptive", seed=3)
created = session.events[0]
print("tasks:", created["tasks"])
print("buttons:", [a["label"] for a in created["actions"] if a["kind"] == "button"])
print("teacher:", created["teacher"]["kind"], "lr", created["teacher"]["teacher_lr"])

# Fail the first episode on purpose: bump into walls until the cap.
obs_seq = session.events[-1]["seq"]
episode_end = None
while episode_end is None:
    for event in session.submit_action(0, obs_seq):
        if event["type"] == "observation":
            obs_seq = event["seq"]
        if event["type"] == "episode_end":
            episode_end = event

task = episode_end["task"]
print(f"\nfailed {task!r} in {episode_end['steps']} steps,"
      f" return {episode_end['ret']}")

# The teacher saw the failure: the task's probability rises.
(advanced,) = session.advance()[:1]
dist = advanced["distribution"]
print("next-task distribution:", dist)
print(f"p[{task}] = {dist[task]} (uniform would be {1 / len(dist):.3f})")

# -- export / import round trip ----------------------------------------------

lines = session.export_lines()
print("\nexport:", len(lines), "lines; header:")
print(json.dumps(json.loads(wire_dumps(lines[0])), indent=None)[:100], "...")

store = SessionStore()
replayed = store.import_export("\n".join(wire_dumps(l) for l in lines))
print("replay matches original log:",
      [wire_dumps(e) for e in replayed.events] ==
      [wire_dumps(e) for e in session.events])
