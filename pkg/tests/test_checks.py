import math

import pytest

from src.harness.checks import (
    GLOBAL_REGISTRY,
    INSTANCE_REGISTRY,
    CheckContext,
    burkholder_rows,
    phi_regime,
    regime_of,
)
from src.harness.config import ExperimentConfig
from src.harness.instances import InstanceGenerator
from src.norms.spaces import SymmetricSpace
from src.orlicz.functions import plog, power


@pytest.fixture
def context(small_config):
    return CheckContext.from_config(ExperimentConfig.model_validate(small_config))


@pytest.fixture
def instances(context):
    config = context.config
    generator = InstanceGenerator(config.build_filtration(), config.build_classical(), config.seed)
    return [generator.instance(i) for i in range(config.instances)]


@pytest.mark.parametrize("check", sorted(INSTANCE_REGISTRY))
def test_instance_check_passes(context, instances, check):
    for inst in instances:
        rows = INSTANCE_REGISTRY[check](context, inst)
        assert rows, f"{check} produced no rows on instance {inst.index}"
        failed = [row for row in rows if row.asserted and not row.passed]
        assert not failed, f"{check} on instance {inst.index} ({inst.family}): {failed}"


def test_orthogonality_rows_are_asserted(context, instances):
    rows = INSTANCE_REGISTRY["orthogonality"](context, instances[0])
    assert [row.check for row in rows] == ["orthogonality-diagonal", "orthogonality-square",
                                           "orthogonality-conditioned"]
    assert all(row.asserted for row in rows)


def test_falsify_small_p_is_report_only(context, instances):
    rows = [INSTANCE_REGISTRY["falsify-small-p"](context, inst)[0] for inst in instances]
    assert [row.note for row in rows] == ["steps=1", "steps=2", "steps=3", "steps=4"]
    assert not any(row.asserted for row in rows)
    assert rows[3].ratio > rows[1].ratio > 1.0


def test_orlicz_indices(context):
    rows = GLOBAL_REGISTRY["orlicz-indices"](context)
    assert len(rows) == 4
    assert all(row.asserted and row.passed for row in rows)


def test_lepingle_extremal(small_config):
    small_config["search"].update({"filtration": "partition:lopsided:16", "floor": 1.1})
    rows = GLOBAL_REGISTRY["lepingle-extremal"](CheckContext.from_config(ExperimentConfig.model_validate(small_config)))
    ratio, floor = rows
    assert ratio.check == "lepingle-extremal" and floor.check == "lepingle-extremal-floor"
    assert 1.1 <= ratio.lhs <= 2.0 * math.sqrt(2.0)
    assert ratio.passed and floor.passed


def test_extremal_search_on_other_objective(small_config):
    small_config["search"].update({"check": "orthogonality", "filtration": "tensor:2x2"})
    rows = GLOBAL_REGISTRY["lepingle-extremal"](CheckContext.from_config(ExperimentConfig.model_validate(small_config)))
    assert [row.check for row in rows] == ["orthogonality-extremal"]
    assert not rows[0].asserted


@pytest.mark.parametrize("check", ["phi-stability", "burkholder-stability"])
def test_stability_rows_are_reported(context, check):
    rows = GLOBAL_REGISTRY[check](context)
    assert rows
    assert not any(row.asserted for row in rows)
    assert all(row.check == check and "->" in row.note for row in rows)


def test_regime_of():
    assert regime_of(SymmetricSpace.parse("L3")) == "max"
    assert regime_of(SymmetricSpace.parse("cap:2:4")) == "max"
    assert regime_of(SymmetricSpace.parse("L1.5")) == "sum"


def test_burkholder_rows_by_regime(martingale):
    assert [r.check for r in burkholder_rows(martingale, SymmetricSpace.parse("L3"))] == [
        "burkholder-max-upper", "burkholder-max-lower"]
    assert [r.check for r in burkholder_rows(martingale, SymmetricSpace.parse("L1.5"))] == ["burkholder-sum-upper"]


def test_phi_regime():
    assert phi_regime(plog(1.3, 0.7)) == "2-concave"
    assert phi_regime(power(3.0)) == "2-convex"


def test_phi_stability_covers_both_regimes(small_config):
    context = CheckContext.from_config(ExperimentConfig.model_validate(small_config))
    notes = [row.note for row in GLOBAL_REGISTRY["phi-stability"](context)]
    assert any("phi-burkholder-inf-upper" in note for note in notes)
    assert any("phi-burkholder-max-upper" in note for note in notes)
    assert any("phi-davis" in note for note in notes)


@pytest.mark.parametrize("check", ["davis-type1", "davis-type2"])
def test_classical_instances_carry_cross_check(context, instances, check):
    classical = [inst for inst in instances if inst.filtration.is_commutative]
    assert classical
    rows = INSTANCE_REGISTRY[check](context, classical[0])
    cross = [row for row in rows if row.check.endswith("-classical")]
    assert len(cross) == len(context.config.p_grid if check == "davis-type1" else context.config.p_small_grid)
    assert all(row.passed for row in cross)


def test_kfunc_oracle_rows(context, instances):
    rows = INSTANCE_REGISTRY["kfunc-oracle"](context, instances[1])
    assert [row.check for row in rows] == ["kfunc-oracle", "kfunc-split-oracle"]
    assert all(row.passed for row in rows)


def test_extremal_rows_name_their_start(small_config):
    small_config["search"].update({"filtration": "partition:lopsided:16", "floor": 1.1})
    rows = GLOBAL_REGISTRY["lepingle-extremal"](CheckContext.from_config(ExperimentConfig.model_validate(small_config)))
    assert all(row.note.startswith("start=") and "gain=" in row.note for row in rows)
