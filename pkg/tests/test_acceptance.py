"""Acceptance suite.

Each test exercises one acceptance criterion end to end and prints a PASS
line (run with ``pytest -s`` to see them); a failed assertion is the FAIL
line.  The heavier checks (rectifier baseline, desk-scale evolution) train
real networks on the WBCD data and take a few minutes combined.
"""

import ast as python_ast
import json
import math
import time

import numpy as np
import pytest

from actevo import network as nn
from actevo.cli import main, run_baseline
from actevo.data import shuffle_split
from actevo.evolution import (
    EvolutionConfig,
    EvolutionState,
    Individual,
    evaluate_individual,
    run,
    step_generation,
)
from actevo.expressions import (
    Binary,
    Bounded,
    Const,
    Input,
    Pow,
    Unary,
    evaluate,
    walk,
)
from actevo.grammar import (
    CODON_MAX,
    GENOME_LENGTH,
    MappingOverflowError,
    map_genotype,
    random_genotype,
)
from actevo.metrics import compute_metrics

# --- independent mapping oracle ---------------------------------------------
# A deliberately separate recursive expansion of the built-in grammar that
# renders plain text; Python's own parser then supplies the tree structure.

ORACLE_PRE_OPS = ("sin", "cos", "tan", "min", "max", "exp", "tanh", "pow")
ORACLE_OPS = ("+", "/", "*", "-")
ORACLE_VARS = ("0.1", "1.0", "2.0", "3.0")


def oracle_expand(codons, n_functions=1):
    state = {"cursor": 0, "wraps": 0, "reads": 0}

    def take():
        if state["cursor"] >= len(codons):
            state["wraps"] += 1
            state["cursor"] = 0
        value = codons[state["cursor"]]
        state["cursor"] += 1
        state["reads"] += 1
        return value

    def expr():
        choice = take() % 3
        if choice == 0:
            return pre_op()
        left = pre_op()
        op = ORACLE_OPS[take() % 4]
        right = expr()
        text = f"{left}{op}{right}"
        return text if choice == 1 else f"({text})"

    def pre_op():
        name = ORACLE_PRE_OPS[take() % 8]
        if name in ("min", "max"):
            return f"{name}(x,{ORACLE_VARS[take() % 4]})"
        if name == "pow":
            inner = pre_op()
            return f"pow({inner},{ORACLE_VARS[take() % 4]})"
        return f"{name}(x)"

    texts = [expr() for _ in range(n_functions)]
    return texts, state["reads"], state["wraps"]


_PY_OPS = {
    python_ast.Add: "+",
    python_ast.Sub: "-",
    python_ast.Mult: "*",
    python_ast.Div: "/",
}


def python_tree(node):
    """Convert a Python-parsed expression into activation nodes."""
    if isinstance(node, python_ast.Expression):
        return python_tree(node.body)
    if isinstance(node, python_ast.BinOp):
        return Binary(_PY_OPS[type(node.op)], python_tree(node.left), python_tree(node.right))
    if isinstance(node, python_ast.Call):
        name = node.func.id
        if name in ("min", "max"):
            return Bounded(name, python_tree(node.args[0]), float(node.args[1].value))
        if name == "pow":
            return Pow(python_tree(node.args[0]), float(node.args[1].value))
        return Unary(name, python_tree(node.args[0]))
    if isinstance(node, python_ast.Name):
        assert node.id == "x"
        return Input()
    if isinstance(node, python_ast.Constant):
        return Const(float(node.value))
    raise AssertionError(f"unexpected python node {node!r}")


def oracle_map(codons, n_functions=1):
    texts, reads, wraps = oracle_expand(codons, n_functions)
    trees = [python_tree(python_ast.parse(t, mode="eval")) for t in texts]
    return trees, reads, wraps


def draw_mappable_genotypes(count, seed, n_functions=1):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        genotype = random_genotype(rng)
        try:
            exprs, trace = map_genotype(genotype, n_functions=n_functions)
        except MappingOverflowError:
            continue
        out.append((genotype, exprs, trace))
    return out


def test_criterion_01_mapping_matches_independent_oracle():
    started = time.perf_counter()
    cases = [((0,) * GENOME_LENGTH,) + map_genotype((0,) * GENOME_LENGTH)]
    cases += draw_mappable_genotypes(50, seed=101)
    for genotype, exprs, trace in cases:
        expected, reads, wraps = oracle_map(genotype)
        assert exprs == expected
        assert trace.codons_consumed == reads
        assert trace.wraps_used == wraps
    for genotype, exprs, trace in draw_mappable_genotypes(10, seed=102, n_functions=3):
        expected, reads, _ = oracle_map(genotype, n_functions=3)
        assert exprs == expected
        assert trace.codons_consumed == reads
    elapsed = time.perf_counter() - started
    assert elapsed < 1.0
    print(f"\nPASS criterion 1: mapping equals brute-force oracle on 61 genomes ({elapsed:.2f}s)")


def test_criterion_02_unused_codons_are_silent():
    started = time.perf_counter()
    mutations = 0
    for genotype, exprs, trace in draw_mappable_genotypes(200, seed=202):
        if trace.wraps_used:
            continue
        used = trace.codons_consumed
        for index in range(used, GENOME_LENGTH):
            replacement = (genotype[index] + 37) % (CODON_MAX + 1)
            mutated = genotype[:index] + (replacement,) + genotype[index + 1 :]
            assert map_genotype(mutated)[0] == exprs
            mutations += 1
    elapsed = time.perf_counter() - started
    assert mutations > 3000
    assert elapsed < 5.0
    print(f"PASS criterion 2: {mutations} tail mutations were silent ({elapsed:.2f}s)")


def test_criterion_03_mod_class_degeneracy():
    checked = 0
    for genotype, exprs, trace in draw_mappable_genotypes(200, seed=303):
        read_counts = {}
        for consumption in trace.consumptions:
            read_counts[consumption.position] = read_counts.get(consumption.position, 0) + 1
        for consumption in trace.consumptions:
            if read_counts[consumption.position] != 1:
                continue
            bumped_value = genotype[consumption.position] + consumption.arity
            if bumped_value > CODON_MAX:
                continue
            bumped = (
                genotype[: consumption.position]
                + (bumped_value,)
                + genotype[consumption.position + 1 :]
            )
            assert map_genotype(bumped)[0] == exprs
            checked += 1
    assert checked > 500
    print(f"PASS criterion 3: {checked} arity bumps left phenotypes unchanged")


def _matrix_margin(expr, z):
    """Distance from every element of z to the nearest guard or kink."""
    margin = math.inf
    for node in walk(expr):
        if isinstance(node, Bounded):
            child = evaluate(node.child, z)
            if not child.ok:
                return 0.0
            margin = min(margin, float(np.min(np.abs(child.values - node.bound))))
        elif isinstance(node, Pow) and node.exponent < 1.0:
            child = evaluate(node.child, z)
            if not child.ok:
                return 0.0
            margin = min(margin, float(np.min(np.abs(child.values))))
        elif isinstance(node, Binary) and node.op == "/":
            right = evaluate(node.right, z)
            if not right.ok:
                return 0.0
            margin = min(margin, float(np.min(np.abs(right.values))))
        elif isinstance(node, Unary) and node.op == "tan":
            child = evaluate(node.child, z)
            if not child.ok:
                return 0.0
            margin = min(margin, float(np.min(np.abs(np.cos(child.values)))))
    return margin


def _guard_free_case(rng, cfg):
    """Sample (net, X, y) whose forward pass stays far from every guard.

    Central differences at h=1e-5 only resolve the gradient where the loss
    is locally smooth, so the filter also bounds activation magnitudes and
    slopes; near a tan pole or a kink the finite-difference oracle itself
    loses the tolerance, not the backpropagation.
    """
    genotype = random_genotype(rng)
    try:
        exprs, _ = map_genotype(genotype, n_functions=cfg.n_activations)
    except MappingOverflowError:
        return None
    X = rng.normal(size=(10, cfg.n_features))
    y = rng.integers(0, 2, 10).astype(float)
    net = nn.init_network(cfg, exprs, seed=int(rng.integers(2**31)))
    a = X
    for i in range(net.n_layers):
        z = a @ net.weights[i] + net.biases[i]
        if i == net.n_layers - 1:
            if np.max(np.abs(z)) > 10.0:
                return None
            break
        if _matrix_margin(net.activations[i], z) < 0.1:
            return None
        values, slopes, status = nn.ex.evaluate_with_derivative(net.activations[i], z)
        if status != "ok" or np.max(np.abs(values)) > 30.0 or np.max(np.abs(slopes)) > 100.0:
            return None
        a = values
    return net, X, y


def test_criterion_04_backprop_matches_finite_differences():
    started = time.perf_counter()
    rng = np.random.default_rng(404)
    cfg = nn.NetworkConfig(n_features=4, hidden_layers=3, output_activation=nn.FIXED_SIGMOID)
    cases = []
    while len(cases) < 13:  # 13 nets x 4 evolved expressions = 52 expressions
        case = _guard_free_case(rng, cfg)
        if case is not None:
            cases.append(case)

    def loss_of(net, X, y):
        p, _ = nn.forward(net, X)
        return nn.bce_loss(p, y)

    h = 1e-5
    compared = 0
    for net, X, y in cases:
        _, grads, guard = nn.loss_and_gradients(net, X, y)
        assert not guard
        for param, grad in zip(net.weights + net.biases, grads):
            it = np.nditer(param, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = param[idx]
                param[idx] = orig + h
                up = loss_of(net, X, y)
                param[idx] = orig - h
                down = loss_of(net, X, y)
                param[idx] = orig
                fd = (up - down) / (2 * h)
                assert abs(fd - grad[idx]) <= 1e-3 * (1.0 + abs(grad[idx]))
                compared += 1
    elapsed = time.perf_counter() - started
    assert compared >= 13 * 265
    assert elapsed < 30.0
    print(f"PASS criterion 4: {compared} parameter gradients match finite differences ({elapsed:.1f}s)")


def test_criterion_05_metric_identities_and_reference_rows():
    rng = np.random.default_rng(505)
    for _ in range(1000):
        n = int(rng.integers(1, 200))
        y = rng.integers(0, 2, n)
        yhat = rng.integers(0, 2, n)
        report = compute_metrics(y, yhat)
        assert abs(report.mae - (1.0 - report.accuracy)) <= 1e-12
        assert abs(report.rmse - math.sqrt(report.mae)) <= 1e-12
    # the reference rows are rounded to three decimals, so sqrt(mae) must land within 2e-3
    for mae, rmse in ((0.034, 0.186), (0.095, 0.309)):
        assert abs(math.sqrt(mae) - rmse) <= 2e-3
    print("PASS criterion 5: mae/rmse/accuracy identities hold on 1000 vectors")


def test_criterion_06_rectifier_baseline_reaches_reference_band(wbcd_dataset):
    started = time.perf_counter()
    cfg = nn.NetworkConfig(n_features=30, hidden_layers=1)
    records = run_baseline(wbcd_dataset, cfg, runs=10, seed=0)
    best = max(r["f1"] for r in records)
    elapsed = time.perf_counter() - started
    assert best >= 0.88
    assert elapsed < 300.0
    print(f"PASS criterion 6: best rectifier F1 over 10 runs = {best:.4f} ({elapsed:.0f}s)")


def test_criterion_07_desk_scale_evolution_tracks_baseline(wbcd_dataset):
    started = time.perf_counter()
    cfg = nn.NetworkConfig(n_features=30, hidden_layers=1)
    seeds = (11, 12, 13)
    elite_f1 = {}
    baseline_f1 = {}
    for seed in seeds:
        evo = EvolutionConfig(population_size=20, generations=20, seed=seed)
        report = run(wbcd_dataset, evo, cfg)
        trace = [r.elite_fitness for r in report.records]
        assert all(b >= a for a, b in zip(trace, trace[1:]))
        elite_f1[seed] = report.elite.test_f1
        baseline_f1[seed] = run_baseline(wbcd_dataset, cfg, runs=1, seed=seed)[0]["f1"]
    primary = seeds[0]
    assert elite_f1[primary] >= baseline_f1[primary] - 0.02
    wins = sum(elite_f1[s] >= baseline_f1[s] for s in seeds)
    assert wins >= 2
    elapsed = time.perf_counter() - started
    assert elapsed < 1800.0
    detail = ", ".join(
        f"seed {s}: {elite_f1[s]:.3f} vs {baseline_f1[s]:.3f}" for s in seeds
    )
    print(f"PASS criterion 7: elite tracks baseline ({detail}; {elapsed:.0f}s)")


EXP_BOMB = tuple([1, 5, 0, 0, 5] * 5 + [0] * 5)


def test_criterion_08_failed_offspring_keep_parents(toy_dataset, sonar_like_dataset):
    # the constructed phenotype overflows on raw sonar-scale inputs
    split = shuffle_split(sonar_like_dataset, seed=1)  # deliberately unstandardized
    cfg = nn.NetworkConfig(n_features=60, hidden_layers=3)
    probe = evaluate_individual(Individual(genotype=EXP_BOMB), split, cfg)
    assert probe.phenotype_texts() == ["exp(x)+exp(x)"] * 5
    assert probe.failure is not None
    assert probe.fitness == 0.0

    # a population of clones: every crossover child is the same doomed genome
    population = [
        evaluate_individual(Individual(genotype=EXP_BOMB), split, cfg) for _ in range(4)
    ]
    state = EvolutionState(
        population=population, elite=population[0].clone(), elite_slot=0
    )
    evo = EvolutionConfig(population_size=4, crossover_rate=1.0, mutation_rate=0.0)
    step_generation(
        state,
        evo,
        np.random.default_rng(0),
        lambda ind: evaluate_individual(ind, split, cfg),
    )
    assert [ind.genotype for ind in state.population] == [EXP_BOMB] * 4
    assert state.records[-1].failures == 2

    # stress run: mutate every individual every generation, size stays fixed
    toy_split = shuffle_split(toy_dataset, seed=2)
    toy_cfg = nn.NetworkConfig(n_features=2, hidden_layers=1, max_epochs=2)
    rng = np.random.default_rng(3)
    stress_pop = [
        evaluate_individual(Individual(genotype=random_genotype(rng)), toy_split, toy_cfg)
        for _ in range(8)
    ]
    stress = EvolutionState(
        population=stress_pop, elite=stress_pop[0].clone(), elite_slot=0
    )
    stress_evo = EvolutionConfig(population_size=8, crossover_rate=0.9, mutation_rate=1.0)
    for _ in range(50):
        step_generation(
            stress,
            stress_evo,
            rng,
            lambda ind: evaluate_individual(ind, toy_split, toy_cfg),
        )
        assert len(stress.population) == 8
        for ind in stress.population:
            assert len(ind.genotype) == GENOME_LENGTH
            assert all(0 <= c <= CODON_MAX for c in ind.genotype)
    print("PASS criterion 8: failed offspring retained parents; size fixed over 50 stress generations")


def test_criterion_09_cli_reports_are_byte_identical(tmp_path, wbcd_csv):
    config = {
        "dataset": {"path": wbcd_csv, "schema": "wbcd"},
        "seed": 9,
        "evolution": {"population_size": 4, "generations": 2},
        "network": {"max_epochs": 3},
    }
    payloads = []
    for label in ("first", "second"):
        cfg = dict(config)
        cfg["output_dir"] = str(tmp_path / label)
        path = tmp_path / f"{label}.json"
        path.write_text(json.dumps(cfg), encoding="utf-8")
        assert main(["evolve", "--config", str(path)]) == 0
        payloads.append((tmp_path / label / "report.json").read_bytes())
    assert payloads[0] == payloads[1]
    print("PASS criterion 9: repeated evolve runs emit byte-identical reports")


def test_criterion_10_curve_export_for_reference_phenotypes(tmp_path):
    phenotypes = (
        "tan(x)+cos(x)-tanh(x)-cos(x)",
        "max(x, 2.0)",
        "min(x,0.1)*max(x,0.1)-tanh(x)",
    )
    for i, text in enumerate(phenotypes):
        out = tmp_path / f"curve_{i}.csv"
        assert main(["curves", "--expression", text, "--out", str(out)]) == 0
        rows = out.read_text().splitlines()
        assert rows[0] == "x,y"
        assert len(rows) == 1001
        xs = [float(r.split(",")[0]) for r in rows[1:]]
        assert xs[0] == -10.0 and xs[-1] == 10.0
        assert min(xs) == -10.0 and max(xs) == 10.0
        if text == "max(x, 2.0)":
            ys = [float(r.split(",")[1]) for r in rows[1:]]
            assert min(ys) == 2.0
    print("PASS criterion 10: curve exports span [-10, 10] with 1000 samples")
