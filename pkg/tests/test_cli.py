import shutil
import subprocess
import sys
import time
from pathlib import Path

import pytest

from e2stack.cli import main

from conftest import write_config

DATA = Path(__file__).resolve().parents[1] / "src" / "e2stack" / "data"
GOLDEN_KPM = [line.split() for line in (DATA / "golden_kpm.txt").read_text().splitlines()]
GOLDEN_FRAMES = (DATA / "golden_frames.hex").read_text().split()


@pytest.mark.parametrize("kind, hexstr", GOLDEN_KPM)
def test_decode_golden_kpm(kind, hexstr, capsys):
    assert main(["decode", "--type", kind, "--verify", hexstr]) == 0
    assert capsys.readouterr().out.rstrip().endswith(f"verify: OK {hexstr}")


@pytest.mark.parametrize("hexstr", GOLDEN_FRAMES)
def test_decode_golden_frames(hexstr, capsys):
    assert main(["decode", "--type", "e2ap-frame", "--verify", hexstr]) == 0
    assert f"verify: OK {hexstr}" in capsys.readouterr().out


def test_decode_event_trigger_fields(capsys):
    main(["decode", "--type", "event-trigger", "03e7"])
    assert "reporting_period_ms: 1000" in capsys.readouterr().out


@pytest.mark.parametrize("kind, hexstr", [("event-trigger", "03"), ("action", "60"),
                                          ("e2ap-frame", "0000"), ("event-trigger", "zz")])
def test_decode_errors_exit_1(kind, hexstr, capsys):
    assert main(["decode", "--type", kind, hexstr]) == 1
    assert "error" in capsys.readouterr().err


def test_compare_published_pairs(capsys):
    assert main(["compare", str(DATA / "fig5a_app.csv"), str(DATA / "fig5a_kpm.csv")]) == 0
    assert "mean_rel_offset: +0.017208129" in capsys.readouterr().out


def test_compare_identical_and_misaligned(tmp_path, capsys):
    app = DATA / "fig6b_app.csv"
    out = tmp_path / "r.txt"
    assert main(["compare", str(app), str(app), "--out", str(out)]) == 0
    assert "mean_rel_offset: +0.000000000" in out.read_text()
    assert main(["compare", str(app), str(DATA / "fig5a_kpm.csv")]) == 1
    assert "align" in capsys.readouterr().err


def test_gen_trace(tmp_path, capsys):
    out = tmp_path / "t.csv"
    assert main(["gen-trace", "--profile", "constant", "--duration", "3", "--rate", "10",
                 "--payload", "380", "--ues", "2", "--out", str(out)]) == 0
    assert "wrote 6 rows" in capsys.readouterr().out
    assert out.read_text().startswith("t_ms,")
    assert main(["gen-trace", "--duration", "2"]) == 0
    capsys.readouterr()
    assert main(["gen-trace", "--duration", "0"]) == 0
    assert capsys.readouterr().out.count("\n") == 1
    assert main(["gen-trace", "--rate", "0"]) == 2


def test_run_missing_trace_exits_2(tmp_path, capsys):
    conf = write_config(tmp_path)
    (tmp_path / "trace.csv").unlink()
    assert main(["run", str(conf)]) == 2
    assert str(tmp_path / "trace.csv") in capsys.readouterr().err


def test_run_is_deterministic_and_fast(tmp_path):
    for out in ("a", "b"):
        conf = write_config(tmp_path, out_dir=out)
        start = time.perf_counter()
        assert main(["run", str(conf)]) == 0
        assert time.perf_counter() - start < 10
    for name in ("kpm.csv", "app.csv", "indications.hex", "report.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_usage_errors_exit_2():
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["decode", "--type", "nope", "00"])
    assert info.value.code == 2


def test_console_script_is_installed():
    exe = shutil.which("kpm-monitor")
    cmd = [exe] if exe else [sys.executable, "-m", "e2stack.cli"]
    proc = subprocess.run(cmd + ["decode", "--type", "event-trigger", "--verify", "03E7"],
                          capture_output=True, text=True, timeout=60)
    assert proc.returncode == 0 and "verify: OK 03E7" in proc.stdout
