import math

import numpy as np
import pytest

from heatgauss.cli import main
from heatgauss.config import RunConfig, load_run_config, parse_config_text
from heatgauss.errors import ConfigurationError

LAPLACE_CFG = """
# reference Laplacian run
[operator]
source = laplace-pi
n = 120

[schedule]
gamma = 0.0 0.4

[sweep]
t_grid = 0.05 0.1 0.2 0.5 1.0 2.0
lam_grid = 0.0 1.0
c2_grid = 0.01 0.05 0.1 0.25
samples = 8
seed = 42
"""


@pytest.fixture()
def laplace_cfg(tmp_path):
    path = tmp_path / "laplace.cfg"
    path.write_text(LAPLACE_CFG, encoding="utf-8")
    return str(path)


class TestConfigParser:
    def test_sections_and_comments(self):
        out = parse_config_text("[a]\nx = 1 # trailing\n# full line\n[b]\ny = two words\n")
        assert out == {"a": {"x": "1"}, "b": {"y": "two words"}}

    def test_error_carries_line_and_column(self):
        with pytest.raises(ConfigurationError, match="line 2"):
            parse_config_text("[a]\nnot-an-assignment\n")
        with pytest.raises(ConfigurationError, match="line 1, column 1"):
            parse_config_text("x = 1\n")

    def test_malformed_header(self):
        with pytest.raises(ConfigurationError, match="malformed section"):
            parse_config_text("[a\nx = 1\n")

    def test_run_config_bounds(self):
        with pytest.raises(ConfigurationError):
            RunConfig(m=4, length=1.0, n=100, source="polyharmonic", gamma_list=[0.0])
        with pytest.raises(ConfigurationError):
            RunConfig(m=1, length=1.0, n=1000, source="polyharmonic", gamma_list=[0.0])

    def test_profile_defaults(self, laplace_cfg):
        cfg = load_run_config(laplace_cfg)
        assert cfg.m == 1
        assert cfg.length == pytest.approx(math.pi)
        assert cfg.seed == 42
        assert cfg.gamma_list == [0.0, 0.4]

    def test_missing_m_for_custom_operator(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("[operator]\nsource = polyharmonic\nn = 50\n", encoding="utf-8")
        with pytest.raises(ConfigurationError, match="missing the required key `m`"):
            load_run_config(str(path))

    def test_seed_override(self, laplace_cfg):
        assert load_run_config(laplace_cfg, seed_override=7).seed == 7


class TestCliRuns:
    def test_spectrum_gap_oracle(self, laplace_cfg, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["spectrum", "--config", laplace_cfg, "--out", str(out)])
        assert code == 0
        lines = (out / "spectrum.csv").read_text().splitlines()
        assert lines[0] == "index,eigenvalue"
        gap = float((out / "gap.csv").read_text().splitlines()[1])
        assert abs(gap - 1.0) / 1.0 <= 5e-3

    def test_kernel_dump_schema(self, laplace_cfg, tmp_path):
        out = tmp_path / "out"
        code = main(["kernel", "--config", laplace_cfg, "--out", str(out)])
        assert code == 0
        lines = (out / "kernel.csv").read_text().splitlines()
        assert lines[0] == "t,x,y,d_x,d_y,k,envelope,ratio"
        assert len(lines) > 1
        first = lines[1].split(",")
        assert len(first) == 8
        # envelope dominates the kernel at the fitted constants
        ratios = [float(ln.split(",")[-1]) for ln in lines[1:]]
        assert max(ratios) <= 1.0 + 1e-9

    def test_malformed_config_exits_2_without_artifacts(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("[operator]\nsource = polyharmonic\n", encoding="utf-8")
        out = tmp_path / "out"
        code = main(["spectrum", "--config", str(bad), "--out", str(out)])
        assert code == 2
        assert not out.exists()

    def test_verify_inequalities_passes(self, laplace_cfg, tmp_path):
        out = tmp_path / "out"
        code = main(["verify-inequalities", "--config", laplace_cfg, "--out", str(out)])
        assert code == 0
        text = (out / "verify_inequalities.csv").read_text()
        assert "false" not in text.split("\n", 1)[1]

    def test_verify_twist_passes(self, laplace_cfg, tmp_path):
        out = tmp_path / "out"
        code = main(["verify-twist", "--config", laplace_cfg, "--out", str(out)])
        assert code == 0

    def test_verify_bounds_deterministic(self, laplace_cfg, tmp_path):
        out1, out2 = tmp_path / "one", tmp_path / "two"
        assert main(["verify-bounds", "--config", laplace_cfg, "--out", str(out1)]) == 0
        assert main(["verify-bounds", "--config", laplace_cfg, "--out", str(out2)]) == 0
        assert (out1 / "verify_bounds.csv").read_bytes() == (out2 / "verify_bounds.csv").read_bytes()

    def test_report_artifacts(self, laplace_cfg, tmp_path):
        out = tmp_path / "out"
        code = main(["report", "--config", laplace_cfg, "--out", str(out)])
        assert code == 0
        for name in ("kernel_boundary.svg", "longtime_norm.svg", "envelope_ratio.svg"):
            body = (out / name).read_text()
            assert body.startswith("<?xml")
            assert "<svg" in body
