import subprocess
import sys

import pytest

from sfwzoo.cli import main
from sfwzoo.config import config_to_text, emit_csv, load_config, read_csv
from sfwzoo.core import METHODS, ValidationError
from sfwzoo.datasets import gaussian_sparse
from sfwzoo.driver import IterationRecord, Trace, run
from sfwzoo.plot import emit_plot


@pytest.fixture(scope="module")
def data8():
    return gaussian_sparse(40, 8, 0.5, seed=0)


def test_sarah_config(data8):
    cfg = load_config("method=sarah\ndataset=x\np=0.1\nb=8\nK=5\n", dataset=data8)
    assert (cfg.method, cfg.p, cfg.b) == ("sarah", 0.1, 8)


def test_marina_default_p(data8):
    cfg = load_config("method=marina\ndataset=x\ncompressor.kind=rand_k\ncompressor.k=2\n", dataset=data8)
    assert cfg.p == pytest.approx(0.2)


@pytest.mark.parametrize(
    "text",
    [
        "method=lsvrg\ndataset=x\nb=0\n",
        "method=lsvrg\ndataset=x\nbogus=1\n",
        "method=lsvrg\ndataset=x\nalpha=0.5\n",
        "method=lsvrg\ndataset=x\nb=2\nb=3\n",
        "method=lsvrg\ndataset=x\np=1.5\n",
        "method=nope\ndataset=x\n",
        "dataset=x\n",
        "method=ef21\ndataset=x\ncompressor.kind=rand_k\n",
        "method=marina\ndataset=x\ncompressor.k=99\n",
        "method=deterministic\ndataset=x\nK=-1\n",
        "method=deterministic\ndataset=x\nschedule=fixed\n",
        "method=deterministic\ndataset=x\nK=1.5\n",
        "method=deterministic\ndataset=x\nlog_every=0\n",
        "method=deterministic\ndataset=x\nl1_radius=0\n",
    ],
)
def test_validation_errors(text, data8):
    with pytest.raises(ValidationError):
        load_config(text, dataset=data8)


@pytest.mark.parametrize("method", METHODS)
def test_every_preset_validates(method, data8):
    cfg = load_config(f"method={method}\ndataset=x\nK=3\n", dataset=data8)
    again = load_config(config_to_text(cfg), dataset=data8)
    assert again == cfg
    assert len(run(cfg)) >= 2


def test_lsvrg_presets(data8):
    cfg = load_config("method=lsvrg\ndataset=x\n", dataset=data8)
    assert cfg.b == 12  # ceil(40^(2/3)) = ceil(11.70)
    assert cfg.p == pytest.approx(12 ** 0.25 / 40 ** 0.5)
    assert cfg.log_every == 2


def test_csv_round_trip(tmp_path):
    tr = Trace(records=[IterationRecord(0, 0.1 + 0.2, 1 / 3, 0, 0, 0, 0.0)])
    p = tmp_path / "t.csv"
    emit_csv(tr, p)
    raw = p.read_bytes()
    assert raw.count(b"\n") == 2 and b"\r" not in raw
    cols = read_csv(p)
    assert cols["f_value"] == [0.1 + 0.2] and cols["fw_gap"] == [1 / 3]
    with pytest.raises(ValidationError):
        emit_csv(Trace(), p)


def test_plot_two_traces(tmp_path):
    out = tmp_path / "p.svg"
    emit_plot([("a", [0, 1, 2], [1, 0.5, 0.2]), ("b", [0, 1, 2], [1, 0.3, 0.1])], "iter", out)
    svg = out.read_text()
    assert svg.count("<polyline") == 2 and ">a</text>" in svg and ">b</text>" in svg


@pytest.mark.parametrize(
    "series,axis,match",
    [
        ([], "iter", "no traces"),
        ([("a", [0], [1.0])], "iter", "single point"),
        ([("a", [0, 0, 0], [1.0, 0.5, 0.2])], "bits_sent", "metric absent for method"),
        ([("a", [0, 1], [0.0, 0.0])], "iter", "positive"),
    ],
)
def test_plot_errors(series, axis, match, tmp_path):
    with pytest.raises(ValidationError, match=match):
        emit_plot(series, axis, tmp_path / "x.svg")


CFG = "method=saga\ndataset=synthetic:gauss-60x10\nK=40\nseed=5\noutput=saga.csv\n"


def test_cli_run_is_byte_reproducible(tmp_path, capsys):
    cfg = tmp_path / "c.txt"
    cfg.write_text(CFG)
    assert main(["run", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["run", str(cfg), "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "saga.csv").read_bytes()
    assert a == (tmp_path / "b" / "saga.csv").read_bytes()
    assert main(["run", str(cfg), "--out", str(tmp_path / "c"), "--seed", "6"]) == 0
    assert a != (tmp_path / "c" / "saga.csv").read_bytes()
    svg = tmp_path / "p.svg"
    assert main(["plot", str(tmp_path / "a" / "saga.csv"), str(tmp_path / "c" / "saga.csv"),
                 "--x", "grad_calls", "--out", str(svg)]) == 0
    assert svg.exists()
    assert main(["plot", str(tmp_path / "a" / "saga.csv"), "--x", "bits_sent", "--out", str(svg)]) == 2


def test_cli_exit_codes(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("method=saga\ndataset=synthetic:gauss-60x10\nb=0\n")
    assert main(["run", str(bad)]) == 2
    assert main(["run", str(tmp_path / "missing.txt")]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["plot", "x.csv", "--x", "wall", "--out", "y.svg"])
    assert exc.value.code == 2
    # runtime failure: output directory is a file
    cfg = tmp_path / "c.txt"
    cfg.write_text(CFG)
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    assert main(["run", str(cfg), "--out", str(blocker)]) == 1


def test_console_script_verify_subset():
    proc = subprocess.run([sys.executable, "-m", "sfwzoo.cli", "verify", "--only", "2", "5"],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.count("[PASS]") == 2
