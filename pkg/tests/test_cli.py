import json
import math
import subprocess
import sys

import pytest

from cubicgate.cli import main
from cubicgate.config import RunConfig, load_config, parse_config
from cubicgate.errors import ContractError
from cubicgate.sweep import CSV_HEADER, SweepResult, csv_text, emit_outputs, run_sweep

SMALL = "re_alpha: [-1.0, -0.5, 0.0, 0.5, 1.0]\nbenchmark: false\n"


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


class TestConfig:
    def test_empty_file_gives_defaults(self, tmp_path):
        cfg = load_config(write(tmp_path, "empty.yaml", ""))
        assert cfg == RunConfig()
        assert cfg.chi == 0.03 and cfg.g == 1.0 and cfg.im_alpha == 0.0
        assert len(cfg.re_alpha) == 17
        assert cfg.re_alpha[0] == -2.0 and cfg.re_alpha[-1] == 2.0

    def test_views(self, tmp_path):
        path = write(tmp_path, "c.yaml", "schema_version: 1\nchi: 0.05\nlambda: 0.8\n")
        assert parse_config(path, "gate").qnd_gain == 0.8
        assert parse_config(path, "gate").chi == 0.05
        assert parse_config(path, "benchmark").lambda_max == 2.5

    def test_negative_chi_accepted(self, tmp_path):
        assert load_config(write(tmp_path, "n.yaml", "chi: -0.03\n")).chi == -0.03

    def test_range_mapping(self, tmp_path):
        cfg = load_config(write(tmp_path, "r.yaml", "re_alpha: {start: -1, stop: 1, step: 0.5}\n"))
        assert cfg.re_alpha == (-1.0, -0.5, 0.0, 0.5, 1.0)

    @pytest.mark.parametrize(
        "text, code, key",
        [
            ("g: 0\n", 3, "g"),
            ("chi: fast\n", 3, "chi"),
            ("q_nodes: 100.5\n", 3, "q_nodes"),
            ("re_alpha: {start: -1, stop: 1, step: 0}\n", 3, "re_alpha.step"),
            ("re_alpha: [2.5]\n", 3, "re_alpha"),
            ("mode: sideways\n", 3, "mode"),
            ("colour: blue\n", 2, "colour"),
            ("schema_version: 2\n", 3, "schema_version"),
        ],
    )
    def test_cli_error_codes(self, tmp_path, capsys, text, code, key):
        path = write(tmp_path, "bad.yaml", text)
        got, _, err = run(["gate", "--config", path], capsys)
        assert got == code
        payload = json.loads(err)
        assert payload["key"] == key
        assert key.split(".")[0] in payload["message"]

    def test_missing_file(self, tmp_path, capsys):
        got, _, err = run(["sweep", "--config", str(tmp_path / "absent.yaml")], capsys)
        assert got == 4
        assert json.loads(err)["error"] == "config-missing-file"

    def test_large_alpha_override(self, tmp_path):
        cfg = load_config(write(tmp_path, "big.yaml", "re_alpha: [2.5]\nallow_large_alpha: true\n"))
        assert cfg.re_alpha == (2.5,)


class TestSubcommands:
    def test_resource(self, capsys):
        code, out, _ = run(["resource"], capsys)
        assert code == 0
        rep = json.loads(out)
        amps = [c[0] for c in rep["unnormalized_amplitudes"][:4]]
        assert amps == pytest.approx([1, 0.0318198, 0, 0.0259808], abs=1e-7)
        assert max(rep["recipe"]["residuals"].values()) < 1e-10
        assert rep["recipe"]["fidelity_with_direct"] > 1 - 1e-8

    def test_gate(self, capsys, tmp_path):
        dump = tmp_path / "rho.csv"
        code, out, _ = run(["gate", "--alpha", "1", "--dump-density", str(dump)], capsys)
        assert code == 0
        rep = json.loads(out)
        assert rep["moments"]["mean_x"] == pytest.approx(math.sqrt(2), abs=1e-8)
        assert rep["moments"]["purity"] < 1
        assert len(rep["p_of_q"]) == 161
        assert dump.read_text().splitlines()[0] == "n,m,re,im"

    def test_gate_probabilistic(self, capsys, tmp_path):
        wf = tmp_path / "wf.csv"
        code, out, _ = run(
            ["gate", "--alpha", "0.5+0.5j", "--mode", "probabilistic", "--g", "100", "--dump-wavefunction", str(wf)],
            capsys,
        )
        assert code == 0
        assert json.loads(out)["success_density"] > 0
        assert len(wf.read_text().splitlines()) == 1002

    def test_gate_domain_error_from_flag(self, capsys):
        code, _, err = run(["gate", "--g", "0"], capsys)
        assert code == 3 and json.loads(err)["key"] == "g"

    def test_bad_alpha(self, capsys):
        code, _, err = run(["gate", "--alpha", "one"], capsys)
        assert code == 3 and json.loads(err)["key"] == "alpha"

    def test_compose(self, capsys):
        code, out, _ = run(["compose", "--chi", "0.05"], capsys)
        rep = json.loads(out)
        assert code == 0
        assert rep["matrix_error"] < 1e-10
        assert sorted(map(tuple, [rep["beta1"], rep["beta2"]])) == pytest.approx(
            [(-0.025, 0.025), (0.025, 0.025)]
        )

    def test_compose_domain(self, capsys):
        code, _, err = run(["compose", "--chi", "-1"], capsys)
        assert code == 1 and json.loads(err)["error"] == "domain"

    def test_benchmark_needs_chi_eff(self, capsys):
        code, _, err = run(["benchmark", "--alpha", "1"], capsys)
        assert code == 3 and json.loads(err)["key"] == "chi_eff"

    def test_benchmark_with_margin(self, capsys, tmp_path):
        gate_json = tmp_path / "gate.json"
        code, out, _ = run(["gate", "--alpha", "0.5"], capsys)
        gate_json.write_text(out)
        code, out, _ = run(
            ["benchmark", "--alpha", "0.5", "--chi-eff", "0.09", "--gate-json", str(gate_json)], capsys
        )
        assert code == 0
        rep = json.loads(out)
        assert rep["margin"] == pytest.approx(rep["moments"]["mean_p2"] - rep["gate_p2"])
        assert rep["chi_eff_source"] == "given"


class TestSweepOutputs:
    def test_header_and_determinism(self, tmp_path, capsys):
        cfg = write(tmp_path, "s.yaml", SMALL)
        a, b = tmp_path / "a", tmp_path / "b"
        assert run(["sweep", "--config", cfg, "--output-dir", str(a)], capsys)[0] == 0
        assert run(["sweep", "--config", cfg, "--output-dir", str(b), "--workers", "3"], capsys)[0] == 0
        first = (a / "sweep.csv").read_bytes()
        assert first == (b / "sweep.csv").read_bytes()
        assert first.split(b"\n", 1)[0] == b"re_alpha,mean_x,mean_p,mean_x2,mean_p2,purity,ideal_p,bench_p2,margin"
        manifest = json.loads((a / "manifest.json").read_text())
        assert manifest["rows"] == 5
        assert manifest["config"]["benchmark"] is False
        assert (a / "plot" / "plot_sweep.py").exists()
        lines = (a / "plot" / "panel_a_gate_x.dat").read_text().splitlines()
        assert len(lines) == 5 and len(lines[0].split()) == 2

    def test_env_output_dir(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("CUBICGATE_OUTPUT_DIR", str(tmp_path / "env"))
        assert run(["sweep", "--config", write(tmp_path, "s.yaml", SMALL)], capsys)[0] == 0
        assert (tmp_path / "env" / "sweep.csv").exists()

    def test_ideal_uses_fitted_chi_eff(self, tmp_path):
        res = run_sweep(load_config(write(tmp_path, "s.yaml", SMALL)))
        assert res.chi_eff_fitted
        for r in res.rows:
            assert r.ideal.mean_p == pytest.approx(r.input.mean_p + res.chi_eff * r.input.mean_x2, abs=1e-12)
            assert r.margin is None

    def test_rows_sorted(self, tmp_path):
        res = run_sweep(load_config(write(tmp_path, "s.yaml", "re_alpha: [1.0, -1.0, 0.5, 0, -0.5]\nbenchmark: false\n")))
        assert [r.re_alpha for r in res.rows] == [-1.0, -0.5, 0.0, 0.5, 1.0]

    def test_negative_chi_flips_fit(self, tmp_path):
        res = run_sweep(load_config(write(tmp_path, "n.yaml", SMALL + "chi: -0.03\n")))
        assert -0.13 < res.chi_eff < -0.07

    def test_empty_rows_refused(self, tmp_path):
        with pytest.raises(ContractError):
            csv_text([])
        with pytest.raises(ContractError):
            emit_outputs(SweepResult(RunConfig(), (), 0.0, False), tmp_path)

    def test_unwritable_path(self, tmp_path, capsys):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        code, _, err = run(
            ["sweep", "--config", write(tmp_path, "s.yaml", SMALL), "--output-dir", str(blocker / "sub")], capsys
        )
        assert code == 5
        payload = json.loads(err)
        assert payload["error"] == "io" and str(blocker) in payload["message"]

    def test_error_names_alpha(self, tmp_path, capsys):
        # signal_dim 12 cannot hold |alpha| = 2, the sweep must say which alpha failed
        cfg = write(tmp_path, "t.yaml", "re_alpha: [0, 0.5, 2.0]\nsignal_dim: 12\nbenchmark: false\n")
        code, _, err = run(["sweep", "--config", cfg], capsys)
        assert code == 1
        assert "alpha=2" in json.loads(err)["message"]

    def test_benchmark_refits_from_csv(self, tmp_path, capsys):
        out = tmp_path / "o"
        run(["sweep", "--config", write(tmp_path, "s.yaml", SMALL), "--output-dir", str(out)], capsys)
        manifest = json.loads((out / "manifest.json").read_text())
        code, text, _ = run(["benchmark", "--alpha", "0.5", "--sweep-csv", str(out / "sweep.csv")], capsys)
        rep = json.loads(text)
        assert code == 0 and rep["chi_eff_source"] == "fitted"
        assert rep["chi_eff"] == pytest.approx(manifest["chi_eff"], rel=1e-9)


def test_console_script_exit_codes(tmp_path):
    bad = tmp_path / "g0.yaml"
    bad.write_text("g: 0\n")
    proc = subprocess.run(
        [sys.executable, "-m", "cubicgate.cli", "gate", "--config", str(bad)], capture_output=True, text=True
    )
    assert proc.returncode == 3
    assert json.loads(proc.stderr)["key"] == "g"


def test_header_constant():
    assert ",".join(CSV_HEADER) == "re_alpha,mean_x,mean_p,mean_x2,mean_p2,purity,ideal_p,bench_p2,margin"
