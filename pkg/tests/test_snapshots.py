import numpy as np

from hydrolimit.pde import MacroProfile
from hydrolimit.snapshots import (read_columnar, read_csv, write_columnar, write_csv,
                                  write_profiles)


def test_columnar_round_trip(tmp_path):
    snaps = np.random.default_rng(0).poisson(2, (3, 4, 5))
    times = np.array([0.0, 0.1, 0.2])
    write_columnar(tmp_path / "s.npz", times, snaps)
    t, s = read_columnar(tmp_path / "s.npz")
    assert np.array_equal(s, snaps)
    assert np.array_equal(t, times)


def test_csv_round_trip(tmp_path):
    snaps = np.random.default_rng(1).normal(size=(2, 3, 4))
    paths = write_csv(tmp_path, [0.0, 1.0], snaps)
    assert np.array_equal(read_csv(paths[1]), snaps[1])
    single = snaps[:, 0, :]
    paths = write_csv(tmp_path / "one", [0.0, 1.0], single)
    assert np.array_equal(read_csv(paths[0]), single[0])


def test_profiles_csv(tmp_path):
    p = write_profiles(tmp_path / "p.csv", [MacroProfile(np.array([1.0, 2.0]), 0.5)])
    lines = p.read_text().splitlines()
    assert lines[0] == "t,u,f"
    assert lines[2] == "0.5,0.5,2.0"
