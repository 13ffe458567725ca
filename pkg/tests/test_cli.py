import json
import math
import subprocess
import sys

import pytest

from ehcap.cli import main, read_config, UsageError
from ehcap.sweep import SweepResult, SweepRow, dumps_json

HEADER = "axis,c_causal_nats,c_si_both_nats,c_battery_nats,support_size"


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_smith_binary(capsys, tmp_path):
    path = tmp_path / "s.json"
    code, out, _ = run(capsys, "smith", "--amplitude", "1.5", "--out", str(path))
    assert code == 0
    assert "support size: 2" in out
    assert "-1.500000" in out and "+1.500000" in out
    doc = json.loads(path.read_text())
    assert sorted(p[0] for p in doc["solution"]["distribution"]["points"]) == [-1.5, 1.5]


def test_smith_zero_and_ternary(capsys):
    code, out, _ = run(capsys, "smith", "--amplitude", "0")
    assert code == 0 and "capacity: 0.0000000000 nats" in out
    code, out, _ = run(capsys, "smith", "--amplitude", "2.0", "--bits")
    assert code == 0 and "support size: 3" in out and "bits" in out


def _field(out, name):
    line = next(l for l in out.splitlines() if l.startswith(name))
    return float(line.split()[1])


def test_onoff_outputs(capsys):
    code, out, _ = run(capsys, "onoff", "--pon", "0.5", "--energy", "2.25")
    assert code == 0
    assert abs(_field(out, "c_battery") - 0.37688) < 1e-5
    code, out, _ = run(capsys, "onoff", "--pon", "1", "--energy", "2.25")
    assert abs(_field(out, "c_causal") - _field(out, "c_si_both")) <= 1e-6
    code, out, _ = run(capsys, "onoff", "--pon", "0.5", "--energy", "0")
    assert all(_field(out, k) == 0.0 for k in ("c_causal", "c_si_both", "c_no_si", "c_battery"))


@pytest.mark.invariant
@pytest.mark.parametrize("argv", [
    ["onoff", "--pon", "1.5", "--energy", "1"],
    ["onoff", "--pon", "0", "--energy", "1"],
    ["smith", "--amplitude", "-1"],
    ["smith", "--amplitude", "1", "--tol", "0"],
    ["smith", "--amplitude", "1", "--kmax", "1"],
    ["smith"],
    ["sweep", "--axis", "pon", "--fixed", "2.25", "--range", "0.5", "0.2", "4"],
    ["sweep", "--axis", "energy", "--fixed", "0.5", "--range", "1", "2", "1"],
    ["ucurve", "--grid", "0.5,1.2"],
])
def test_usage_errors_exit_2(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2


@pytest.mark.invariant
def test_nonconvergence_exit_3(capsys):
    code, out, _ = run(capsys, "smith", "--amplitude", "3.0", "--kmax", "2")
    assert code == 3 and "converged: False" in out


def test_config_precedence(capsys, tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# solver limits\nkmax = 2\nbits = yes\n")
    code, out, _ = run(capsys, "smith", "--amplitude", "3.0", "--config", str(cfg))
    assert code == 3 and "bits" in out
    code, _, _ = run(capsys, "smith", "--amplitude", "3.0", "--config", str(cfg), "--kmax", "8")
    assert code == 0


def test_config_rejects_unknown_keys(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("colour = blue\n")
    with pytest.raises(UsageError):
        read_config(str(cfg))
    cfg.write_text("kmax = many\n")
    with pytest.raises(UsageError):
        read_config(str(cfg))


SWEEP = ["sweep", "--axis", "energy", "--fixed", "0.5", "--range", "2.0", "3.5", "4"]


@pytest.mark.invariant
def test_sweep_csv_format_and_determinism(capsys):
    code, out, _ = run(capsys, *SWEEP)
    assert code == 0
    lines = out.split("\n")
    assert lines[0] == HEADER
    assert out.endswith("\n") and "\r" not in out
    rows = [l.split(",") for l in lines[1:-1]]
    assert [float(r[0]) for r in rows] == [2.0, 2.5, 3.0, 3.5]
    for r in rows:
        c, s, b = map(float, r[1:4])
        assert 0 <= c + 1e-6 and c <= s + 1e-6 and s <= b + 1e-6
    assert [int(r[4]) for r in rows] == [2, 2, 2, 3]
    _, again, _ = run(capsys, *SWEEP)
    assert again == out


def test_sweep_bits_adds_columns(capsys):
    code, out, _ = run(capsys, *SWEEP[:-3], "1.0", "2.0", "2", "--bits")
    header, first = out.splitlines()[:2]
    assert header == HEADER + ",c_causal_bits,c_si_both_bits,c_battery_bits"
    vals = first.split(",")
    assert float(vals[5]) == pytest.approx(float(vals[1]) / math.log(2), rel=1e-12)


@pytest.mark.invariant
def test_sweep_json_round_trip(capsys, tmp_path):
    path = tmp_path / "s.json"
    code, _, _ = run(capsys, *SWEEP, "--format", "json", "--out", str(path))
    text = path.read_text()
    doc = json.loads(text)
    assert set(doc) == {"meta", "rows"}
    assert dumps_json(doc) == text
    assert set(doc["rows"][0]) == set(HEADER.split(","))
    for key in ("version", "options", "wall_time_s", "quadrature", "tolerances"):
        assert key in doc["meta"]


def test_sweep_result_rejects_unsorted_rows():
    row = SweepRow(1.0, 0.1, 0.2, 0.3, 2, 2, True)
    with pytest.raises(ValueError):
        SweepResult("energy", [row, row], {})


def test_pon_sweep_binary(capsys):
    code, out, _ = run(capsys, "sweep", "--axis", "pon", "--fixed", "2.25", "--range", "0.1", "1.0", "10")
    assert code == 0
    assert all(l.endswith(",2") for l in out.splitlines()[1:])


def test_ucurve(capsys):
    code, out, _ = run(capsys, "ucurve", "--grid", "1.0,0.5,0.75", "--tol-x", "1e-3")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "p_on,u_threshold"
    rows = [tuple(map(float, l.split(","))) for l in lines[1:]]
    assert [p for p, _ in rows] == [0.5, 0.75, 1.0]
    us = [u for _, u in rows]
    assert all(b <= a + 1e-3 for a, b in zip(us, us[1:]))
    assert abs(rows[0][1] - 1.74) <= 0.02 and abs(rows[-1][1] - 1.66) <= 0.02


@pytest.fixture(scope="module")
def validate_reports(tmp_path_factory):
    d = tmp_path_factory.mktemp("val")
    out = {}
    for name, extra in (("a", []), ("b", []), ("tight", ["--oracle-tol", "1e-9"])):
        path = d / f"{name}.txt"
        code = main(["validate", "--seed", "7", "--mc-samples", "200000", "--out", str(path), *extra])
        out[name] = (code, path.read_bytes())
    return out


def test_validate_passes(validate_reports):
    code, text = validate_reports["a"]
    assert code == 0 and text.endswith(b"OK\n")
    assert b"FAIL" not in text


@pytest.mark.invariant
def test_validate_is_byte_identical(validate_reports):
    assert validate_reports["a"][1] == validate_reports["b"][1]


def test_validate_tight_oracle_fails(validate_reports):
    code, text = validate_reports["tight"]
    assert code != 0 and text.endswith(b"FAILED\n")
    assert b"FAIL oracle    smith a=3.0" in text


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "ehcap.cli", "smith", "--amplitude", "1.0"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and "support size: 2" in res.stdout
