import json

import numpy as np
import pytest

from pywex.model import (WealthState, ConstantKernel, TableKernel, FunctionKernel, KappaForm, InvalidKernelError,
                         build_transition_table, parse_kernel, builtin_kernels)


def test_two_agent_symmetric_table():
    table = build_transition_table(ConstantKernel(2, 0.5), WealthState((3, 7)))
    assert table.probability_of(0, 1) == pytest.approx(0.5)
    assert table.probability_of(1, 0) == pytest.approx(0.5)
    assert table.stay_probability == pytest.approx(0.0)


def test_three_agent_symmetric_table():
    kernel = ConstantKernel(3, 0.1)
    assert kernel.kappa(0, 1, WealthState((3, 3, 4))) == pytest.approx(0.3)
    table = build_transition_table(kernel, WealthState((3, 3, 4)))
    assert table.probabilities == pytest.approx([0.1] * 6)
    assert table.stay_probability == pytest.approx(0.4)


def test_bankrupt_agents_never_trade():
    table = build_transition_table(ConstantKernel(2, 0.5), WealthState((0, 10)))
    assert table.probabilities == pytest.approx([0.0, 0.0])
    assert table.stay_probability == 1.0

    edge = build_transition_table(ConstantKernel(3, 0.1), WealthState((0, 4, 6)))
    assert edge.probability_of(1, 2) == pytest.approx(0.1)
    assert edge.probability_of(0, 1) == 0.0
    assert edge.probability_of(1, 0) == 0.0
    assert edge.stay_probability == pytest.approx(0.8)


def test_entries_follow_lexicographic_pairs():
    table = build_transition_table(ConstantKernel(3, 0.1), WealthState((3, 3, 4)))
    assert [(e.jump.gainer, e.jump.loser) for e in table] == [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)]


def test_constant_kernel_admissibility():
    assert ConstantKernel.max_admissible(2) == pytest.approx(0.5)
    assert ConstantKernel.max_admissible(3) == pytest.approx(1 / 6)
    with pytest.raises(InvalidKernelError):
        ConstantKernel(3, 0.5)
    with pytest.raises(InvalidKernelError):
        ConstantKernel(2, -0.1)


def test_function_kernel_outside_unit_interval():
    kernel = FunctionKernel(2, lambda i, j, state: 1.5)
    with pytest.raises(InvalidKernelError):
        build_transition_table(kernel, WealthState((3, 7)))


def test_function_kernel_total_above_one():
    kernel = FunctionKernel(3, lambda i, j, state: 0.9)
    with pytest.raises(InvalidKernelError):
        build_transition_table(kernel, WealthState((3, 3, 4)))
    with pytest.raises(InvalidKernelError):
        kernel.check_admissible(10.0)


def test_function_kernel_admissible_on_sample_states():
    rich_gain = FunctionKernel(3, lambda i, j, state: 0.2 if state[i] > state[j] else 0.0)
    rich_gain.check_admissible(12.0)
    ConstantKernel(3, 1 / 6).check_admissible(10.0)


def test_table_kernel_proportional_entries():
    kernel = TableKernel(2, {(0, 1): KappaForm(slope=0.05), (1, 0): KappaForm(constant=0.2)})
    table = build_transition_table(kernel, WealthState((3, 7)))
    assert table.probability_of(0, 1) == pytest.approx(0.35)
    assert table.probability_of(1, 0) == pytest.approx(0.2)
    kernel.check_admissible(10.0)
    with pytest.raises(InvalidKernelError):
        kernel.check_admissible(20.0)


def test_table_kernel_rejects_bad_pairs():
    with pytest.raises(InvalidKernelError):
        TableKernel(2, {(0, 0): KappaForm(constant=0.1)})
    with pytest.raises(InvalidKernelError):
        TableKernel(2, {(0, 1): KappaForm(constant=0.7), (1, 0): KappaForm(constant=0.6)})


def test_parse_kernel():
    kernel = parse_kernel("constant(0.25)", 2)
    assert isinstance(kernel, ConstantKernel)
    assert kernel.c == 0.25
    assert kernel.name == "constant(0.25)"
    assert set(builtin_kernels) == {"constant", "table"}


@pytest.mark.parametrize("spec", ["constant", "unknown(1)", "constant(1, 2)", "constant(abc)"])
def test_parse_kernel_errors(spec):
    with pytest.raises(InvalidKernelError):
        parse_kernel(spec, 2)


def test_table_kernel_from_file(tmp_path):
    path = tmp_path / "asym.json"
    path.write_text(json.dumps({"n": 3, "entries": {"0,1": 0.3, "1,0": {"proportional": 0.01},
                                                    "2,1": {"constant": 0.2}}}))
    kernel = parse_kernel("table(asym.json)", 3, tmp_path)
    nu = kernel.pair_nu(np.array([[3.0, 3.0, 4.0]]))[0]
    assert nu[kernel.pair_index(0, 1)] == pytest.approx(0.1)
    assert nu[kernel.pair_index(1, 0)] == pytest.approx(0.01)
    assert nu[kernel.pair_index(2, 1)] == pytest.approx(0.2 / 3)
    assert nu[kernel.pair_index(0, 2)] == 0.0


def test_table_kernel_wrong_agent_count(tmp_path):
    path = tmp_path / "two.json"
    path.write_text(json.dumps({"n": 2, "entries": {"0,1": 0.3}}))
    with pytest.raises(InvalidKernelError):
        parse_kernel("table(two.json)", 3, tmp_path)
