from __future__ import annotations

from pathlib import Path

import pytest
from click.testing import CliRunner

from gtlab.cli import main
from gtlab.errors import ConfigError
from gtlab.suites import SUITES, RunConfig

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _files(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_list_checks():
    res = CliRunner().invoke(main, ["--list-checks"])
    assert res.exit_code == 0
    assert [line.split(":")[0] for line in res.output.splitlines()] == list(SUITES)
    res = CliRunner().invoke(main, ["cone", "--list-checks"])
    assert res.exit_code == 0 and res.output.startswith("cone:")


@pytest.mark.parametrize("fmt", ["csv", "jsonl"])
def test_bundle_outputs_and_exit_code(tmp_path, fmt):
    res = CliRunner().invoke(main, ["bundle", "--out", str(tmp_path), "--format", fmt])
    assert res.exit_code == 0, res.output
    files = _files(tmp_path)
    assert f"bundle/summary.{fmt}" in files and f"bundle/obstructions.{fmt}" in files
    assert b"FAIL" not in files[f"bundle/summary.{fmt}"]
    assert all(line.startswith("PASS") for line in res.output.splitlines()[:-1])


def test_rerun_is_byte_identical(tmp_path):
    r = CliRunner()
    for d in ("a", "b"):
        res = r.invoke(main, ["dolbeault", "--seed", "3", "--out", str(tmp_path / d)])
        assert res.exit_code == 0
    assert _files(tmp_path / "a") == _files(tmp_path / "b")
    res = r.invoke(main, ["dolbeault", "--seed", "4", "--out", str(tmp_path / "c")])
    assert _files(tmp_path / "c") != _files(tmp_path / "a")


def test_env_out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("GTL_OUT_DIR", str(tmp_path / "env"))
    res = CliRunner().invoke(main, ["bundle"])
    assert res.exit_code == 0
    assert (tmp_path / "env" / "bundle" / "summary.csv").exists()
    res = CliRunner().invoke(main, ["bundle", "--out", str(tmp_path / "flag")])
    assert (tmp_path / "flag" / "bundle" / "summary.csv").exists()


def test_config_file(tmp_path):
    res = CliRunner().invoke(main, ["kernels", "--config", str(CONFIGS / "kernels_sphere.yaml"), "--out", str(tmp_path)])
    assert res.exit_code == 0, res.output
    text = (tmp_path / "kernels" / "kernels.csv").read_text()
    assert text.splitlines()[0] == "backend,op,k,dim_numeric,dim_formula,gap"
    assert len(text.splitlines()) == 23


@pytest.mark.parametrize(
    "body",
    [
        "surface: {kind: klein_bottle}\n",
        "surface: {kind: flat_torus, resolution: 7}\n",
        "surface: {kind: flat_torus, resolution: abc}\n",
        "surface: {kind: flat_torus, lattice: [[1, 0], [2, 0]]}\n",
        "tolerances: {gauge: -1}\n",
        "tolerances: {made_up: 1.0}\n",
        "params: {a0_mean: zzz}\n",
        "bogus_key: 1\n",
        "suite: cone\n",
        "[1, 2\n",
        "- 1\n- 2\n",
    ],
)
def test_config_errors_exit_2(tmp_path, body):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(body)
    res = CliRunner().invoke(main, ["bundle", "--config", str(cfg), "--out", str(tmp_path)])
    assert res.exit_code == 2, res.output


def test_missing_seed_is_config_error(tmp_path):
    res = CliRunner().invoke(main, ["algebra", "--out", str(tmp_path)])
    assert res.exit_code == 2
    with pytest.raises(ConfigError):
        RunConfig.from_mapping("stability", {})


def test_numeric_failure_exit_1(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("seed: 1\ntolerances: {dolbeault: 1.0e-30}\n")
    res = CliRunner().invoke(main, ["dolbeault", "--config", str(cfg), "--out", str(tmp_path)])
    assert res.exit_code == 1
    assert "FAIL dolbeault" in res.output
    assert "FAIL" in (tmp_path / "dolbeault" / "summary.csv").read_text()


def test_module_error_becomes_failing_check(tmp_path):
    # kernels on a coarse conformal torus cannot separate singular values
    cfg = tmp_path / "c.yaml"
    cfg.write_text(
        "surface:\n  kind: conformal_torus\n  resolution: 16\n"
        "  conformal_factor: [{wave: [1, 0], coef: 0.05}, {wave: [-1, 0], coef: 0.05}]\n"
        "params: {kmax: 1}\n"
    )
    res = CliRunner().invoke(main, ["kernels", "--config", str(cfg), "--out", str(tmp_path)])
    assert res.exit_code == 1
    assert "TruncationTooTight" in res.output


def test_unknown_suite_rejected():
    res = CliRunner().invoke(main, ["fly"])
    assert res.exit_code == 2


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.yaml")), ids=lambda p: p.stem)
def test_shipped_configs_parse(path):
    import yaml

    data = yaml.safe_load(path.read_text())
    suite = data.pop("suite")
    cfg = RunConfig.from_mapping(suite, data)
    assert cfg.suite in SUITES
