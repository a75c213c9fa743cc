"""Snapshot and profile serialization (columnar ``.npz`` and CSV)."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np


def write_columnar(path, times, snapshots) -> Path:
    """Store ``(C, R, N)`` snapshots as flat columns ``checkpoint, t, replica, site, value``."""
    snaps = np.asarray(snapshots)
    if snaps.ndim == 2:
        snaps = snaps[:, None, :]
    C, R, N = snaps.shape
    c, r, x = np.meshgrid(np.arange(C), np.arange(R), np.arange(N), indexing="ij")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        np.savez_compressed(fh, checkpoint=c.ravel().astype(np.int32),
                            t=np.asarray(times, dtype=np.float64)[c.ravel()],
                            replica=r.ravel().astype(np.int32), site=x.ravel().astype(np.int32),
                            value=snaps.ravel(), shape=np.array([C, R, N]))
    return path


def read_columnar(path):
    """Inverse of :func:`write_columnar`; returns ``(times, snapshots)``."""
    with np.load(path) as z:
        C, R, N = z["shape"]
        snaps = np.empty((C, R, N), dtype=z["value"].dtype)
        snaps[z["checkpoint"], z["replica"], z["site"]] = z["value"]
        times = np.zeros(C)
        times[z["checkpoint"]] = z["t"]
    return times, snaps


def write_csv(directory, times, snapshots) -> list[Path]:
    """One CSV per checkpoint with columns ``site, value`` (plus ``replica`` for batches)."""
    snaps = np.asarray(snapshots)
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = []
    for c, t in enumerate(times):
        p = d / f"checkpoint_{c:03d}.csv"
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            if snaps.ndim == 2:
                w.writerow(["site", "value"])
                w.writerows((x, _fmt(v)) for x, v in enumerate(snaps[c]))
            else:
                w.writerow(["replica", "site", "value"])
                for r in range(snaps.shape[1]):
                    w.writerows((r, x, _fmt(v)) for x, v in enumerate(snaps[c, r]))
        paths.append(p)
    return paths


def read_csv(path) -> np.ndarray:
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    if "replica" not in rows[0]:
        return np.array([float(r["value"]) for r in rows])
    R = max(int(r["replica"]) for r in rows) + 1
    N = max(int(r["site"]) for r in rows) + 1
    out = np.empty((R, N))
    for r in rows:
        out[int(r["replica"]), int(r["site"])] = float(r["value"])
    return out


def write_profiles(path, profiles) -> Path:
    """Profiles as long-format CSV ``t, u, f``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "u", "f"])
        for p in profiles:
            for u, f in zip(p.grid, p.values):
                w.writerow([repr(float(p.t)), repr(float(u)), repr(float(f))])
    return path


def write_series(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows([_fmt(v) for v in row] for row in rows)
    return path


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v
