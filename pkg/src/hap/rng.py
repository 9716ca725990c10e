"""Named, splittable random streams derived from a single root seed."""

from __future__ import annotations

import hashlib

import numpy as np


def _name_key(name: str) -> tuple[int, ...]:
    # Stable across runs and platforms: sha256 of the name, folded to four uint32 words.
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return tuple(int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4))


class SeedTree:
    """Derives independent generators by name from one root seed.

    A stream depends only on (root seed, path of names), never on how many
    sibling streams exist or the order they were created in, so adding a new
    consumer cannot reshuffle anyone else's draws. PCG64 keeps the draws
    reproducible across runs on the same numpy major version.
    """

    def __init__(self, root_seed: int, _path: tuple[int, ...] = ()):
        self.root_seed = int(root_seed)
        self._path = _path

    def child(self, name: str) -> "SeedTree":
        """A subtree whose streams are all namespaced under `name`."""
        return SeedTree(self.root_seed, self._path + _name_key(name))

    def stream(self, name: str) -> np.random.Generator:
        """A fresh generator for the named consumer; same name, same draws."""
        seq = np.random.SeedSequence(entropy=self.root_seed, spawn_key=self._path + _name_key(name))
        return np.random.Generator(np.random.PCG64(seq))
