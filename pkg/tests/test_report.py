import pytest

from unprompt.metrics import MetricReport
from unprompt.report import COLUMNS, export_report, fmt_value, read_csv, render


def _rep(label="a", **extra):
    return MetricReport.build(0.123456789, per_seed_l2=0.05, ssim=0.97, frechet_pre=0.8, frechet_real=1.25,
                              n_seeds=64, config_hash="abc", label=label, extra=extra)


def test_csv_has_header_and_one_row_per_report(tmp_path):
    text = render([_rep(), _rep("b")], "csv")
    lines = text.strip().splitlines()
    assert len(lines) == 3
    assert lines[0].split(",")[: len(COLUMNS)] == list(COLUMNS)


def test_csv_round_trip_within_print_precision(tmp_path):
    rep = _rep(sim_8=0.3)
    export_report([rep], "csv", tmp_path / "r.csv")
    (row,) = read_csv(tmp_path / "r.csv")
    assert row["forgetting_similarity"] == pytest.approx(rep.forgetting_similarity, rel=1e-5)
    assert row["forgotten"] is True and row["label"] == "a" and row["extra.sim_8"] == 0.3
    assert row["n_seeds"] == 64


def test_kv_text():
    text = render([_rep()], "kv-text")
    assert "# report 0" in text and "ssim = 0.97" in text


def test_fmt_and_unknown_format():
    assert fmt_value(True) == "true" and fmt_value(0.1234567891) == "0.123457"
    with pytest.raises(ValueError):
        render([_rep()], "xml")
