import numpy as np
import pytest

from spinboson.scenarios import (
    PRESETS,
    ScenarioError,
    ScenarioPreset,
    get_preset,
    make_scenario,
    refinement_check,
    sphere_area,
)


def test_sphere_area():
    assert sphere_area(2) == pytest.approx(2 * np.pi)
    assert sphere_area(3) == pytest.approx(4 * np.pi)


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_every_preset_builds(name):
    grid = make_scenario(PRESETS[name])
    assert grid.M >= 1
    assert np.all(grid.omega > 0)
    assert np.isfinite(grid.displacement_norm_sq)


def test_massive_preset_has_mass_as_minimum():
    grid = make_scenario(get_preset("massive_3d"))
    assert grid.min_omega >= 1.0
    assert grid.min_omega == pytest.approx(1.0, abs=1e-2)


def test_massive_refinement_within_one_percent():
    preset = get_preset("massive_3d")
    assert preset.nodes == 32
    coarse = make_scenario(preset).ir_norm_sq
    reference = make_scenario(preset, scale=8).ir_norm_sq
    assert abs(coarse - reference) / reference < 0.01
    assert refinement_check(preset)["converged"]


def test_counterexample_displacement_norm_grows():
    norms = [make_scenario(get_preset("counterexample_3d", family_g=g)).displacement_norm_sq for g in (1, 10, 100)]
    assert norms[0] < norms[1] < norms[2]


def test_massless_preset_is_infrared_regular():
    grid = make_scenario(get_preset("massless_ir_regular"))
    assert grid.min_omega < 0.5
    assert np.isfinite(grid.displacement_norm_sq)


def test_uv_family_diverges_with_cutoff():
    norms = []
    for cutoff in (4.0, 16.0, 64.0):
        preset = get_preset("uv_cutoff_3d", cutoff=cutoff)
        grid = make_scenario(preset)
        high = grid.omega > preset.split_mass
        norms.append(np.sum(np.abs(grid.v[high] / grid.omega[high]) ** 2))
    assert norms[0] < norms[1] < norms[2]


def test_discrete_preset_is_taken_verbatim():
    grid = make_scenario(get_preset("two_mode"))
    assert grid.omega.tolist() == [1.0, 2.0]
    assert grid.v.tolist() == [0.7, 0.3]


def test_contract_errors():
    with pytest.raises(ScenarioError, match="available presets"):
        get_preset("nope")
    with pytest.raises(ScenarioError):
        ScenarioPreset("massive_generic", mass=0.0)
    with pytest.raises(ScenarioError):
        ScenarioPreset("spin_boson_3d_cutoff", mass=1.0, split_mass=3.0, cutoff=2.0)
    with pytest.raises(ScenarioError):
        ScenarioPreset("counterexample_3d", family_g=0.4)
    with pytest.raises(ScenarioError):
        ScenarioPreset("unknown")
    with pytest.raises(ScenarioError):
        ScenarioPreset("discrete", omega=(1.0,), v=())
