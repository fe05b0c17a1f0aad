import json
import math

import numpy as np
import pytest

from thermocloak.harness import report
from thermocloak.harness import sweep as sweep_module
from thermocloak.harness.cli import main
from thermocloak.harness.config import ConfigError, SweepConfig, parse_config, parse_envelope
from thermocloak.harness.fitting import calibrate_constant, fit_rate
from thermocloak.harness.sweep import VisibilityRecord, object_independence_check, object_tag, run_sweep
from thermocloak.heat import BoxEnvelope, ExpEnvelope
from thermocloak.medium import ObjectSpec
from thermocloak.special import rate_frequency, rate_time

EPS = [0.02, 0.04, 0.08, 0.16]


# ---------------------------------------------------------------- fitting


def test_power_law_exact():
    fit = fit_rate([(e, 0.7 * e) for e in EPS], "power-law")
    assert fit.value == pytest.approx(1.0, abs=1e-10)
    assert fit.residual <= 1e-12
    assert fit.excluded == [0.16] and fit.n_used == 3


def test_log_reciprocal_exact():
    fit = fit_rate([(e, 1 / abs(math.log(e))) for e in EPS], "log-reciprocal")
    assert fit.value == pytest.approx(1.0, abs=1e-12)
    assert fit.exponent == pytest.approx(1.0, abs=1e-10)


def test_fit_keeps_all_points_when_asked():
    fit = fit_rate([(e, e**2) for e in EPS], exclude_largest=False)
    assert fit.n_used == 4 and fit.value == pytest.approx(2.0)


def test_fit_degenerate_and_invalid():
    fit = fit_rate([(0.1, 0.0), (0.2, 1.0), (0.3, 2.0)])
    assert fit.degenerate and math.isnan(fit.value)
    with pytest.raises(ValueError):
        fit_rate([(0.1, 1.0), (0.2, 2.0)])
    with pytest.raises(ValueError):
        fit_rate([(0.1, 1.0), (0.1, 2.0), (0.2, 3.0)])
    with pytest.raises(ValueError):
        fit_rate([(0.1, 1.0), (0.2, 2.0), (0.3, 3.0)], model="cubic")


def test_calibrate_constant():
    assert calibrate_constant([1.0, 3.0], [2.0, 2.0]) == 1.5
    with pytest.raises(ValueError):
        calibrate_constant([1.0], [0.0])


def test_record_norm_order_enforced():
    with pytest.raises(ValueError):
        VisibilityRecord(0.1, 1.0, None, 2.0, 1.0, 0.1, "m", "s")
    rec = VisibilityRecord(0.1, 4.0, None, 1.0, 2.0, 0.5, "m", "s", 3.0)
    assert rec.bound_factor == pytest.approx(0.5 * 1.5 * 3.0)


# ---------------------------------------------------------------- config


def test_parse_config_defaults_and_lists():
    cfg = parse_config(
        """
        # comment
        dimension = 3
        epsilons = 0.02, 0.04 0.08
        omegas = 1, 4
        object.tensor = 2, 100
        object.density = 3
        source.center = 3, 0
        source.envelope = exp:2
        out_dir = somewhere
        """
    )
    assert cfg.epsilons == [0.02, 0.04, 0.08]
    assert [object_tag(o) for o in cfg.objects] == ["a2_rho3", "a100_rho3"]
    assert cfg.source_center == (3.0, 0.0, 0.0)
    assert isinstance(cfg.envelope, ExpEnvelope) and cfg.envelope.rate == 2.0
    assert cfg.out_dir == "somewhere" and cfg.radial


def test_parse_envelope():
    assert parse_envelope("steady") == BoxEnvelope()
    assert parse_envelope("box:1.5").duration == 1.5
    with pytest.raises(ConfigError):
        parse_envelope("ramp:1")


@pytest.mark.parametrize(
    "text",
    [
        "epsilons = 0.6",
        "omegas = 0",
        "r_obs = 1.5",
        "dimension = 4",
        "t_final = 1",
        "colour = red",
        "dimension = 2\nnx = 65",
        "dimension = 2\nnx = 64\nepsilons = 0.1",
        "object.tensor = 1, 2, 3\nobject.density = 1, 2",
        "nx = many",
    ],
)
def test_config_rejections(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_resolution_rule_can_be_relaxed():
    cfg = parse_config("dimension = 2\nnx = 64\nepsilons = 0.1\nstrict_resolution = false")
    assert cfg.h == pytest.approx(0.125)


# ---------------------------------------------------------------- sweeps


def small_cfg(**kw):
    base = dict(dimension=3, epsilons=list(EPS), omegas=[1.0], nx=200, write_fields=False)
    base.update(kw)
    return SweepConfig(**base)


@pytest.fixture(scope="module")
def sweep_3d():
    return run_sweep(small_cfg(omegas=[1.0, 4.0], t_final=0.2, dt=0.02))


def test_sweep_records_and_envelopes(sweep_3d):
    freq = sweep_3d.frequency_records()
    assert len(freq) == 8
    for r in freq:
        assert r.envelope == rate_frequency(r.epsilon, r.omega, 3)
        assert r.errH1 >= r.errL2 >= 0
    for r in sweep_3d.records:
        if r.time is not None:
            assert r.envelope == rate_time(r.epsilon, 3)
    assert not sweep_3d.failures
    assert set(sweep_3d.summary["fits"]) == {"a2_rho3/omega=1", "a2_rho3/omega=4", "a2_rho3/time-sup"}


def test_sweep_3d_rate(sweep_3d):
    slope = sweep_3d.summary["fits"]["a2_rho3/omega=1"]["power-law"]["value"]
    assert 0.8 <= slope <= 1.2


def test_refinement_stability():
    coarse = fit_rate(run_sweep(small_cfg(nx=200), time_domain=False).records).value
    fine = fit_rate(run_sweep(small_cfg(nx=400), time_domain=False).records).value
    assert abs(coarse - fine) <= 0.05


def test_identical_media_give_zero_records():
    # a = eps I and rho = eps^3 make the rescaled inclusion exactly (I, 1) in 3D
    eps = 0.1
    cfg = small_cfg(epsilons=[eps], objects=[ObjectSpec(eps, eps**3, 10.0)])
    res = run_sweep(cfg, time_domain=False)
    assert res.records and all(r.errL2 == 0 and r.errH1 == 0 for r in res.records)


def test_failed_point_recorded_and_sweep_continues(monkeypatch):
    real = sweep_module.make_grid

    def flaky(cfg, eps):
        if eps == 0.04:
            raise RuntimeError("mesh generator unavailable")
        return real(cfg, eps)

    monkeypatch.setattr(sweep_module, "make_grid", flaky)
    res = run_sweep(small_cfg(), time_domain=False)
    assert len(res.failures) == 1 and res.failures[0].epsilon == 0.04
    assert "mesh generator" in res.failures[0].message
    assert [r.epsilon for r in res.records] == [0.02, 0.08, 0.16]


def test_identical_objects_identical_records():
    res = run_sweep(small_cfg(objects=[ObjectSpec(), ObjectSpec()]), time_domain=False)
    half = len(res.records) // 2
    a, b = res.records[:half], res.records[half:]
    assert [(r.errL2, r.errH1) for r in a] == [(r.errL2, r.errH1) for r in b]


def test_common_envelope_bounds_both_objects():
    cfg = small_cfg(epsilons=[0.05], omegas=[0.25, 1.0, 4.0, 16.0, 64.0], nx=400,
                    objects=[ObjectSpec.isotropic(2, 3), ObjectSpec.isotropic(100, 3)])
    recs = run_sweep(cfg, time_domain=False).records
    anchor = [r for r in recs if r.omega == 0.25]
    c = calibrate_constant([r.errH1 for r in anchor], [r.bound_factor for r in anchor])
    assert all(r.errH1 <= c * r.bound_factor for r in recs)


def test_object_independence_asymptotic():
    cfg = small_cfg(epsilons=[1e-4, 2e-4, 4e-4, 8e-4], objects=[ObjectSpec.isotropic(2, 3), ObjectSpec.isotropic(2, 0.1)])
    rep = object_independence_check(cfg)
    assert rep.passed and rep.slope_difference <= 0.2


@pytest.mark.xfail(strict=True, reason="density contrast leaves eps in [0.02, 0.16] pre-asymptotic; see decisions ledger")
def test_object_independence_density_contrast():
    cfg = small_cfg(objects=[ObjectSpec.isotropic(2, 3), ObjectSpec.isotropic(2, 0.1)])
    assert object_independence_check(cfg).slope_difference <= 0.2


def test_object_independence_needs_contrast():
    with pytest.raises(ValueError):
        object_independence_check(small_cfg(objects=[ObjectSpec.isotropic(2, 3), ObjectSpec.isotropic(3, 3)]))


def test_2d_sweep_runs():
    cfg = SweepConfig(dimension=2, epsilons=[0.25, 0.3, 0.4], omegas=[1.0], nx=64, t_final=0.1, dt=0.05,
                      strict_resolution=False, write_fields=False)
    res = run_sweep(cfg)
    assert len(res.frequency_records()) == 3
    assert len(res.peak_time_records("a2_rho3")) == 3
    assert "log-reciprocal" in res.summary["fits"]["a2_rho3/omega=1"]


# ---------------------------------------------------------------- outputs and CLI

CFG_TEXT = """
dimension = 3
epsilons = 0.05, 0.1, 0.2
omegas = 1, 4
nx = 100
t_final = 0.1
dt = 0.05
object.tensor = 2, 100
object.density = 3, 3
source.envelope = exp:1
spectral = true
"""


@pytest.fixture()
def cfg_file(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text(CFG_TEXT)
    return p


def test_freq_run_outputs_deterministic(cfg_file, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["freq-run", str(cfg_file), "--out", str(a)]) == 0
    assert main(["freq-run", str(cfg_file), "--out", str(b)]) == 0
    csvs = sorted(p.name for p in a.glob("*.csv"))
    assert "freq_a2_rho3.csv" in csvs and "freq_a100_rho3.csv" in csvs
    for name in csvs + ["summary.json"]:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert (a / "rates_frequency.png").stat().st_size > 0
    header, data = report.read_rows(a / "freq_a2_rho3.csv")
    assert header == ["epsilon", "omega", "errL2", "errH1", "envelope"]
    for eps, omega, _, _, env in data:
        assert env == rate_frequency(eps, omega, 3)


def test_time_run_with_spectral_outputs(cfg_file, tmp_path):
    out = tmp_path / "t"
    assert main(["time-run", str(cfg_file), "--out", str(out)]) == 0
    assert (out / "time_a2_rho3_eps0.1.csv").exists()
    assert (out / "spectrum_a2_rho3_eps0.1.csv").exists()
    assert (out / "synth_a2_rho3_eps0.1.csv").exists()
    assert (out / "time_curves.png").exists()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["mode"] == "time" and "frequency_integral_bounds" in summary
    header, _ = report.read_rows(out / "spectrum_a2_rho3_eps0.1.csv")
    assert header == ["omega", "errL2", "errH1"]


def test_sweep_and_rates(cfg_file, tmp_path, capsys):
    out = tmp_path / "s"
    assert main(["sweep", str(cfg_file), "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert "object_independence" in summary and "fits" in summary
    assert main(["rates", str(out)]) == 0
    rates = json.loads((out / "rates.json").read_text())
    assert "freq_a2_rho3/omega=1" in rates and "time_a2_rho3/sup" in rates
    assert "power-law=" in capsys.readouterr().out


def test_validate_subset(tmp_path, capsys):
    rc = main(["validate", "--only", "C4", "--out", str(tmp_path)])
    line = capsys.readouterr().out.strip()
    assert line.startswith("C4 ") and ("PASS" in line or "FAIL" in line)
    data = json.loads((tmp_path / "validation.json").read_text())
    assert data["checks"][0]["key"] == "C4"
    assert rc == (0 if data["passed"] else 1)


def test_cli_errors(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("epsilons = 0.9\n")
    assert main(["freq-run", str(bad)]) == 2
    assert main(["freq-run", str(tmp_path / "missing.cfg")]) == 2
    assert main(["rates", str(tmp_path)]) == 2
    assert main(["validate", "--only", "C99"]) == 2


def test_summary_json_handles_nonfinite(tmp_path):
    report.write_summary(tmp_path / "s.json", {"a": float("nan"), "b": np.float64(2.0), "c": np.bool_(True)})
    assert json.loads((tmp_path / "s.json").read_text()) == {"a": None, "b": 2.0, "c": True}
