import struct

import numpy as np
import pytest

from unprompt import checkpoint as ck
from unprompt import denoiser as dn
from unprompt.errors import IoFailure, MissingCheckpoint, ScheduleMismatch, VersionMismatch
from unprompt.schedule import make_schedule


def _params(T=100, sd=0.5):
    s = make_schedule(T=T)
    p = dn.init_params(dn.Arch.for_data(4, hidden=(6,), embed_dim=2, sigma_data=sd), 0, s if sd else None)
    return dn.adam_update(p, np.linspace(-1, 1, p.theta.size), 1e-3), s


def test_round_trip_is_bit_exact(tmp_path):
    p, s = _params()
    digest = ck.save_checkpoint(p, tmp_path / "a.ckpt", seed=7)
    q, seed = ck.load_checkpoint(tmp_path / "a.ckpt", s)
    assert seed == 7 and q.step == p.step and q.arch == p.arch
    for a, b in ((p.theta, q.theta), (p.m, q.m), (p.v, q.v)):
        assert a.tobytes() == b.tobytes()
    assert q.schedule.hash() == s.hash()
    assert digest == ck.file_hash(tmp_path / "a.ckpt")
    assert ck.encode(q, 7) == ck.encode(p, 7)


def test_schedule_rebuilt_without_caller_schedule():
    p, s = _params()
    q, _ = ck.decode(ck.encode(p))
    np.testing.assert_array_equal(q.schedule.alpha_bar, s.alpha_bar)
    np.testing.assert_array_equal(dn.predict_noise(q, np.ones(4), 10), dn.predict_noise(p, np.ones(4), 10))


def test_unpreconditioned_round_trip():
    p, _ = _params(sd=None)
    q, _ = ck.decode(ck.encode(p))
    assert q.schedule is None or q.arch.sigma_data is None
    assert q.theta.tobytes() == p.theta.tobytes()


def test_schedule_mismatch():
    p, _ = _params(T=100)
    with pytest.raises(ScheduleMismatch):
        ck.decode(ck.encode(p), make_schedule(T=50))


def test_truncation_reports_offset():
    buf = ck.encode(_params()[0])
    for cut in (0, 5, 20, len(buf) // 2, len(buf) - 1):
        with pytest.raises(IoFailure) as exc:
            ck.decode(buf[:cut])
        assert exc.value.offset is not None and exc.value.offset <= cut


def test_bad_magic_trailing_bytes_and_version():
    buf = ck.encode(_params()[0])
    with pytest.raises(IoFailure):
        ck.decode(b"NOTACKPT" + buf[8:])
    with pytest.raises(IoFailure):
        ck.decode(buf + b"\0")
    bumped = buf[:8] + struct.pack("<I", ck.VERSION + 1) + buf[12:]
    with pytest.raises(VersionMismatch):
        ck.decode(bumped)


def test_missing_file(tmp_path):
    with pytest.raises(MissingCheckpoint):
        ck.load_checkpoint(tmp_path / "nope.ckpt")
