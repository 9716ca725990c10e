"""Running experiments through the harness and reading the artifacts back.

A run directory is self-describing: the resolved config, a metrics CSV (one
row per training episode and per eval sweep), a teacher trace CSV, the
final checkpoint, and wall-clock timing. Same spec + same seed means
byte-identical CSVs.
"""

import tempfile
from pathlib import Path

from hap.harness import load_run, load_trace, run, summarize_run
from hap.presets import preset, with_seeds

out = Path(tempfile.mkdtemp(prefix="hap-demo-"))

# Shrink the nav preset so the demo finishes in seconds.
spec = preset("nav")
spec.total_steps = 12_000
spec.eval_every = 2_000
spec = with_seeds(spec, (0,))

run_dir = run(spec, seed=0, out_root=out)
print("run directory:", run_dir.name)
for path in sorted(run_dir.iterdir()):
    print(f"  {path.name:16s} {path.stat().st_size:7d} bytes")

data = load_run(run_dir)
print("\ntasks:", data.tasks)
print("eval sweeps at steps:", data.eval_step.astype(int).tolist())
print("final eval success:",
      {t: float(r) for t, r in zip(data.tasks, data.eval_rates[-1].round(2))})

trace = load_trace(run_dir)
print("\nteacher updates logged:", len(trace["step"]))
print("last distribution:",
      {t: float(p) for t, p in zip(data.tasks, trace["probs"][-1].round(3))})

summary = summarize_run(run_dir)
print("\nsummary:", summary)

# Determinism: run the same seed again and compare bytes.
rerun = run(spec, seed=0, out_root=out / "again")
same = (run_dir / "metrics.csv").read_bytes() == (rerun / "metrics.csv").read_bytes()
print("\nre-run metrics byte-identical:", same)
