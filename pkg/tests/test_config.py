import math

import pytest

from predkl.config import ExperimentConfig, parse_config
from predkl.errors import ConfigError
from predkl.priors import PriorFamilySpec

BASE = """\
experiment = verify-bridge
model.p = 3
model.v_x = 1
model.v_y = 2
prior.1.kind = harmonic
prior.2.kind = blyth
prior.2.n = 8
prior.2.base.kind = power
prior.2.base.b = 0.5
mu.radii = 0, 1.5, 4   # trailing comment
budget = 500
seed = 99
workers = 2
"""


class TestParse:
    def test_full(self):
        cfg = parse_config(BASE)
        assert cfg.experiment == "verify-bridge"
        assert (cfg.model.p, cfg.model.v_x, cfg.model.v_y) == (3, 1.0, 2.0)
        assert cfg.priors[0] == PriorFamilySpec("harmonic")
        assert cfg.priors[1] == PriorFamilySpec("blyth", base=PriorFamilySpec("power", b=0.5), n=8)
        assert cfg.mu_radii == [0.0, 1.5, 4.0]
        assert (cfg.budget, cfg.seed, cfg.workers) == (500, 99, 2)
        assert cfg.output_format == "json" and cfg.output_path is None

    def test_bound_sets_v_y(self):
        text = "experiment = truncation-demo\nmodel.p = 1\nmodel.v_x = 1\nmodel.bound = 1\n" \
               "truncation.edges = 0, 1\ntruncation.values = 1\ntruncation.mu = 0\n"
        cfg = parse_config(text)
        assert cfg.model.v_y == pytest.approx(1 / (2 * math.pi))
        assert cfg.model.bound == pytest.approx(1.0)

    def test_round_trip(self):
        cfg = parse_config(BASE)
        again = parse_config(cfg.to_text())
        assert again == cfg
        assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


class TestErrors:
    @pytest.mark.parametrize("line,replacement,field", [
        ("model.p = 3", "model.p = three", "model.p"),
        ("budget = 500", "budget = 0", "budget"),
        ("workers = 2", "workers = -1", "workers"),
        ("seed = 99", "seed = -5", "seed"),
        ("prior.1.kind = harmonic", "prior.1.kind = cauchy", "prior.1.kind"),
        ("prior.2.base.b = 0.5", "prior.2.base.zeta = 0.5", "prior.2.base.zeta"),
        ("mu.radii = 0, 1.5, 4   # trailing comment", "mu.radii = 0, -1", "mu.radii"),
        ("model.v_y = 2", "model.v_y = 0", "model.v_y"),
    ])
    def test_line_and_field(self, line, replacement, field):
        text = BASE.replace(line, replacement)
        lineno = BASE.splitlines().index(line) + 1
        with pytest.raises(ConfigError) as info:
            parse_config(text)
        assert info.value.field == field
        assert info.value.line == lineno
        assert f"line {lineno}" in str(info.value)

    def test_unknown_model_key(self):
        with pytest.raises(ConfigError, match="only isotropic"):
            parse_config(BASE + "model.covariance = 1, 0, 0, 1\n")

    def test_unknown_key(self):
        with pytest.raises(ConfigError) as info:
            parse_config(BASE + "colour = blue\n")
        assert info.value.field == "colour"

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config(BASE + "budget = 10\n")

    def test_malformed_line(self):
        with pytest.raises(ConfigError) as info:
            parse_config("experiment = risk-table\nthis is not a pair\n")
        assert info.value.line == 2

    def test_missing_required(self):
        with pytest.raises(ConfigError) as info:
            parse_config("experiment = risk-table\nmodel.p = 1\nmodel.v_y = 1\nprior.1.kind = uniform\n")
        assert info.value.field == "model.v_x"

    def test_unknown_experiment(self):
        with pytest.raises(ConfigError) as info:
            parse_config(BASE.replace("verify-bridge", "bake-cake"))
        assert info.value.field == "experiment"

    def test_blyth_needs_low_dimension(self):
        text = "experiment = blyth-run\nmodel.p = 3\nmodel.v_x = 1\nmodel.v_y = 1\nprior.1.kind = uniform\n"
        with pytest.raises(ConfigError) as info:
            parse_config(text)
        assert info.value.field == "model.p" and info.value.line == 2

    def test_prior_required(self):
        with pytest.raises(ConfigError, match="needs at least one prior"):
            parse_config("experiment = risk-table\nmodel.p = 1\nmodel.v_x = 1\nmodel.v_y = 1\n")

    def test_direction_length(self):
        with pytest.raises(ConfigError) as info:
            parse_config(BASE + "mu.direction = 1, 0\n")
        assert info.value.field == "mu.direction"

    def test_format_choice(self):
        with pytest.raises(ConfigError) as info:
            parse_config(BASE + "output.format = xml\n")
        assert info.value.field == "output.format"
