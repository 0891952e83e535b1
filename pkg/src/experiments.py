"""
Frostlab Experiments Module
Runners behind the `run` subcommand

Each runner turns one configured experiment into CSV rows and pass/fail
criteria. Inputs are built from named fixtures (Cantor sets, product
measures, direction families) with seeds derived from the global seed.
"""

import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

import numpy as np

from .config import ExperimentConfig
from .errors import ConfigError, PreconditionError
from .furstenberg import run_furstenberg
from .generators import (NON_CONCENTRATION_THRESHOLD, ap_intersection_set, ap_neighborhood_set,
                         cantor_set, non_concentration_constant, product_set)
from .grassmann import DirectionFamily, sample_directions, transversal_subfamily
from .grid_core import DeltaSet, write_set
from .incidence import (check_incidence_bound, incidence_mass, incidence_mass_bruteforce,
                        random_affine_family)
from .measure_lab import (DiscreteMeasure, FubiniMeasure, amplitude, energy, frostman_constant,
                          product_measure, read_measure, uniform_measure)
from .parallel import ordered_map
from .projector import BoundReport, check_l2_classical, check_projection_bound
from .reports import Criterion, ReportRow, l2_window_ok, log_growth_ok, ratio_growth_ok
from .sumproduct import run_sumproduct, sumproduct_row

logger = logging.getLogger(__name__)

# Fixed splitting constants: one random stream per module
MODULE_KEYS = {'generators': 11, 'grassmann': 23, 'incidence': 37, 'furstenberg': 41, 'sumproduct': 53}

_REQUIRED = object()


def module_seed(seed: int, module: str) -> int:
    """Seed of one module's stream, derived from the global seed"""
    sequence = np.random.SeedSequence(seed, spawn_key=(MODULE_KEYS[module],))
    return int(sequence.generate_state(1, dtype=np.uint32)[0])


@dataclass
class ExperimentResult:
    name: str
    params: Dict[str, Any]
    rows: List[ReportRow] = field(default_factory=list)
    criteria: List[Criterion] = field(default_factory=list)


class Params:
    """Typed access to an experiment's parameters; unknown keys are reported"""

    def __init__(self, experiment: ExperimentConfig):
        self.experiment = experiment
        self.values = dict(experiment.params)
        self.used = set()

    def get(self, key: str, default: Any = _REQUIRED, kind: Callable = float) -> Any:
        self.used.add(key)
        if key not in self.values or self.values[key] is None:
            if default is _REQUIRED:
                raise self.experiment.fail(f"missing parameter {key!r}")
            return default
        value = self.values[key]
        if kind is bool:
            if not isinstance(value, bool):
                raise self.experiment.fail(f"parameter {key!r} must be true or false, got {value!r}")
            return value
        try:
            return kind(value)
        except (TypeError, ValueError):
            raise self.experiment.fail(f"parameter {key!r} must be {kind.__name__}, got {value!r}")

    def finish(self):
        unknown = sorted(set(self.values) - self.used)
        if unknown:
            raise self.experiment.fail(f"unknown parameter(s) {', '.join(unknown)}")


def parse_levels(value: Union[str, int, Sequence[int]]) -> List[int]:
    """'6..10', 8 or [6, 8, 10]"""
    if isinstance(value, int):
        return [value]
    if isinstance(value, str):
        match = re.fullmatch(r'\s*(\d+)\s*\.\.\s*(\d+)\s*', value)
        if not match:
            raise ValueError(f"levels must look like '6..10', got {value!r}")
        first, last = int(match.group(1)), int(match.group(2))
        if last < first:
            raise ValueError(f"empty level range {value!r}")
        return list(range(first, last + 1))
    levels = [int(level) for level in value]
    if not levels:
        raise ValueError("levels must not be empty")
    return levels


def build_measure(params: Params, level: int, seed: int) -> Union[DiscreteMeasure, FubiniMeasure]:
    """Measure fixtures: two_atom, cantor, product_cantor, full, file"""
    kind = params.get('measure', 'product_cantor', str)
    gen_seed = module_seed(seed, 'generators')
    if kind == 'two_atom':
        # Weights 1/2 at 1/8 and 7/8
        return DiscreteMeasure.from_cells(1, 2, [[0], [3]], [0.5, 0.5])
    if kind == 'cantor':
        return uniform_measure(cantor_set(level, params.get('s_set', 0.5), gen_seed))
    if kind == 'product_cantor':
        first = uniform_measure(cantor_set(level, params.get('s1', 0.6), gen_seed))
        second = uniform_measure(cantor_set(level, params.get('s2', 0.6), gen_seed + 1))
        return product_measure(first, second)
    if kind == 'full':
        return uniform_measure(DeltaSet.full(params.get('dim', 2, int), level))
    if kind == 'file':
        return read_measure(params.get('path', kind=str))
    raise params.experiment.fail(f"unknown measure {kind!r}")


def _flat(mu: Union[DiscreteMeasure, FubiniMeasure]) -> DiscreteMeasure:
    return mu.assemble() if isinstance(mu, FubiniMeasure) else mu


def build_directions(params: Params, d: int, level: int, seed: int) -> DirectionFamily:
    spec = params.get('directions', 'full', str)
    angular_level = params.get('angular_level', level, int)
    return sample_directions(d, params.get('n', 1, int), spec, angular_level,
                             module_seed(seed, 'grassmann'))


def _bound_row(report: BoundReport, order: int) -> ReportRow:
    return ReportRow('bound', order, report.params['level'], report.csv_row())


def _finite(experiment: str, report: BoundReport) -> Criterion:
    return Criterion(experiment, f"{report.check}_finite", math.isfinite(report.ratio),
                     f"ratio {report.ratio:.6g} at level {report.params['level']}")


def run_gen(params: Params, seed: int, order: int, output_dir: Path) -> ExperimentResult:
    kind = params.get('kind', 'cantor', str)
    level = params.get('level', 12, int)
    gen_seed = module_seed(seed, 'generators')
    s = params.get('s', None)

    if kind == 'cantor':
        result = cantor_set(level, 0.5 if s is None else s, gen_seed)
        s = 0.5 if s is None else s
    elif kind == 'ap':
        result = ap_neighborhood_set(level, params.get('terms', 16, int),
                                     params.get('spacing_exponent', 4, int))
    elif kind == 'ap_intersection':
        layers = params.get('layers', [], list)
        try:
            result = ap_intersection_set(level, [(int(a), int(b)) for a, b in layers])
        except (TypeError, ValueError):
            raise params.experiment.fail("layers must be a list of [a, b] pairs")
    elif kind == 'product':
        s1 = 0.5 if s is None else s
        s2 = params.get('s2', s1)
        result = product_set(cantor_set(level, s1, gen_seed), cantor_set(level, s2, gen_seed + 1))
        s = s1 + s2
    else:
        raise params.experiment.fail(f"unknown generator kind {kind!r}")

    target = output_dir / params.get('file', f"gen_{order}.txt", str)
    target.parent.mkdir(parents=True, exist_ok=True)
    write_set(target, result)

    outcome = ExperimentResult('gen', params.values)
    constant = non_concentration_constant(result, s) if s is not None else None
    passed = constant is None or constant <= NON_CONCENTRATION_THRESHOLD
    outcome.rows.append(ReportRow('gen', order, level, dict(
        kind=kind, level=level, s=s, cells=result.cell_count,
        audit_constant=constant, audit_pass=passed)))
    if constant is not None:
        outcome.criteria.append(Criterion('gen', 'non_concentration', passed,
                                          f"constant {constant:.4g} (threshold {NON_CONCENTRATION_THRESHOLD:g})"))
    return outcome


def run_energy(params: Params, seed: int, order: int, level: Optional[int] = None) -> ExperimentResult:
    level = params.get('level', 8, int) if level is None else level
    label = params.get('measure', 'product_cantor', str)
    mu = _flat(build_measure(params, level, seed))
    exponents = params.get('s', [1.0], list) if isinstance(params.values.get('s'), list) \
        else [params.get('s', 1.0)]
    alpha = params.get('alpha', None)
    frostman = params.get('frostman', None)

    outcome = ExperimentResult('energy', params.values)
    values = [('energy', float(s), energy(mu, float(s))) for s in exponents]
    if alpha is not None:
        values.append(('amplitude', alpha, amplitude(mu, alpha)))
    if frostman is not None:
        values.append(('frostman', frostman, frostman_constant(mu, frostman)))
    for quantity, exponent, value in values:
        outcome.rows.append(ReportRow('energy', order, mu.level, dict(
            measure=label, level=mu.level, quantity=quantity, exponent=exponent, value=value)))
    return outcome


def _projection_reports(params: Params, seed: int, level: int) -> List[BoundReport]:
    mu = build_measure(params, level, seed)
    fam = build_directions(params, mu.dim, level, seed)
    s = params.get('s', 1.1)
    variant = params.get('variant', 'general', str)
    variants = ['general', 'fubini'] if variant == 'both' else [variant]

    reports = []
    for name in variants:
        alpha = params.get('alpha_fubini', 0.55) if variant == 'both' and name == 'fubini' \
            else params.get('alpha', 1.1)
        members = transversal_subfamily(fam, fam.d - fam.n) if name == 'fubini' else fam
        reports.append(check_projection_bound(mu, members, s, alpha, name))
    return reports


def _l2_report(params: Params, seed: int, level: int) -> BoundReport:
    mu = _flat(build_measure(params, level, seed))
    fam = build_directions(params, mu.dim, level, seed)
    return check_l2_classical(mu, fam, params.get('sigma', None))


def _incidence_reports(params: Params, seed: int, level: int) -> List[BoundReport]:
    mu = build_measure(params, level, seed)
    d = mu.dim
    k = params.get('k', 1, int)
    sigma = params.get('sigma', 1.0)
    fam = random_affine_family(d, k, params.get('count', 200, int), level,
                               module_seed(seed, 'incidence'), sigma)
    variant = params.get('variant', 'general', str)
    report = check_incidence_bound(mu, fam, params.get('s', 1.1), sigma, params.get('alpha', 1.1), variant)
    if params.get('oracle', False, bool):
        flat = _flat(mu)
        report.extras['oracle_match'] = incidence_mass(flat, fam) == incidence_mass_bruteforce(flat, fam)
    return [report]


def run_single_bound(name: str, params: Params, seed: int, order: int) -> ExperimentResult:
    level = params.get('level', 8, int)
    if name == 'project':
        reports = _projection_reports(params, seed, level)
    elif name == 'l2':
        reports = [_l2_report(params, seed, level)]
    else:
        reports = _incidence_reports(params, seed, level)

    outcome = ExperimentResult(name, params.values)
    for report in reports:
        outcome.rows.append(_bound_row(report, order))
        outcome.criteria.append(_finite(name, report))
        if 'oracle_match' in report.extras:
            outcome.criteria.append(Criterion(name, 'oracle_match', report.extras['oracle_match'],
                                              'accelerated incidence mass equals brute force'))
    return outcome


def run_furstenberg_experiment(params: Params, seed: int, order: int,
                               level: Optional[int] = None) -> ExperimentResult:
    level = params.get('level', 10, int) if level is None else level
    report = run_furstenberg(level, params.get('s', 0.5), params.get('t', 0.5),
                             params.get('sigma', 1.0), module_seed(seed, 'furstenberg'),
                             params.get('span', 4, int))
    outcome = ExperimentResult('furstenberg', params.values)
    outcome.rows.append(ReportRow('furstenberg', order, level, report.csv_row()))
    outcome.criteria.append(Criterion(
        'furstenberg', 'lower_bound', report.measured_dim >= report.lower_bound - 0.15,
        f"measured {report.measured_dim:.4f} vs lower bound {report.lower_bound:.4f}"))
    outcome.criteria.append(Criterion(
        'furstenberg', 'conjectured_upper_bound', report.measured_dim <= report.upper_bound + 0.15,
        f"measured {report.measured_dim:.4f} vs conjectured {report.upper_bound:.4f}", advisory=True))
    return outcome


def _interval_set(kind: str, level: int, s: float, seed: int) -> DeltaSet:
    if kind == 'cantor':
        return cantor_set(level, s, seed)
    if kind == 'full':
        return DeltaSet.full(1, level)
    if kind == 'cell':
        return DeltaSet(1, level, [[0]])
    raise PreconditionError(f"unknown set kind {kind!r}")


def run_sumproduct_experiment(params: Params, seed: int, order: int,
                              level: Optional[int] = None) -> ExperimentResult:
    level = params.get('level', 10, int) if level is None else level
    s_b = params.get('s_B', 0.4)
    s_c = params.get('s_C', s_b)
    base = module_seed(seed, 'sumproduct')
    b_set = _interval_set(params.get('B', 'cantor', str), level, s_b, base)
    c_set = b_set if s_c == s_b and params.get('C', 'B', str) == 'B' \
        else _interval_set(params.get('C', 'cantor', str), level, s_c, base + 1)
    a_kind = params.get('A', 'B', str)
    a_set = b_set if a_kind == 'B' else _interval_set(a_kind, level, params.get('s_A', 0.5), base + 2)

    report = run_sumproduct(a_set, b_set, c_set, s_b, s_c,
                            params.get('sandwich_max_level', 10, int), params.get('max_lines', 64, int))
    outcome = ExperimentResult('sumproduct', params.values)
    outcome.rows.append(ReportRow('sumproduct', order, level, sumproduct_row(report)))
    outcome.criteria.append(Criterion(
        'sumproduct', 'max_size_bound', report.extras['pass'],
        f"level {level}: max size {report.lhs:.6g} vs |A|^{report.params['exponent']:.4g} = {report.rhs:.6g}"))
    if 'incidence_lower_ratio' in report.extras:
        ratio = report.extras['incidence_lower_ratio']
        outcome.criteria.append(Criterion('sumproduct', 'incidence_lower', ratio >= 0.25,
                                          f"incidence / (δ|A|·|L|) = {ratio:.4g}"))
    if not report.extras['hypothesis_met']:
        outcome.criteria.append(Criterion('sumproduct', 'hypothesis', False,
                                          'B or C fails its non-concentration hypothesis', advisory=True))
    return outcome


def run_sweep(params: Params, seed: int, order: int) -> ExperimentResult:
    check = params.get('check', kind=str)
    try:
        levels = parse_levels(params.get('levels', '6..10', lambda v: v))
    except ValueError as e:
        raise params.experiment.fail(str(e))
    outcome = ExperimentResult('sweep', params.values)

    if check in ('projection', 'l2', 'incidence'):
        if check == 'projection':
            runs = ordered_map(lambda level: _projection_reports(params, seed, level), levels)
        elif check == 'l2':
            runs = ordered_map(lambda level: [_l2_report(params, seed, level)], levels)
        else:
            runs = ordered_map(lambda level: _incidence_reports(params, seed, level), levels)

        for reports in runs:
            outcome.rows.extend(_bound_row(report, order) for report in reports)
        for position in range(len(runs[0])):
            series = [reports[position] for reports in runs]
            ratios = [report.ratio for report in series]
            name = series[0].check
            if check == 'l2':
                passed, detail = l2_window_ok(levels, ratios)
                outcome.criteria.append(Criterion('sweep', f"{name}_window", passed, detail))
            else:
                passed, detail = ratio_growth_ok(levels, ratios)
                outcome.criteria.append(Criterion('sweep', f"{name}_ratio_step", passed, detail))
                passed, detail = log_growth_ok(levels, ratios)
                outcome.criteria.append(Criterion('sweep', f"{name}_log_growth", passed, detail, advisory=True))
            if 'oracle_match' in series[0].extras:
                outcome.criteria.append(Criterion('sweep', 'oracle_match',
                                                  all(r.extras['oracle_match'] for r in series),
                                                  'accelerated incidence mass equals brute force'))
        if check == 'projection' and len(runs[0]) == 2:
            general, fubini = runs[0]
            outcome.criteria.append(Criterion('sweep', 'fubini_exponent_larger',
                                              fubini.params['p'] > general.params['p'],
                                              f"p {fubini.params['p']:.4g} vs {general.params['p']:.4g}"))
    elif check in ('sumproduct', 'furstenberg', 'energy'):
        runner = {'sumproduct': run_sumproduct_experiment, 'furstenberg': run_furstenberg_experiment,
                  'energy': run_energy}[check]
        for result in ordered_map(lambda level: runner(params, seed, order, level), levels):
            outcome.rows.extend(result.rows)
            outcome.criteria.extend(result.criteria)
    else:
        raise params.experiment.fail(f"unknown sweep check {check!r}")
    return outcome


def run_experiment(experiment: ExperimentConfig, seed: int, order: int, output_dir: Path) -> ExperimentResult:
    """Dispatch one configured experiment; precondition failures become config errors"""
    params = Params(experiment)
    try:
        if experiment.name == 'gen':
            result = run_gen(params, seed, order, output_dir)
        elif experiment.name == 'energy':
            result = run_energy(params, seed, order)
        elif experiment.name in ('project', 'l2', 'incidence'):
            result = run_single_bound(experiment.name, params, seed, order)
        elif experiment.name == 'furstenberg':
            result = run_furstenberg_experiment(params, seed, order)
        elif experiment.name == 'sumproduct':
            result = run_sumproduct_experiment(params, seed, order)
        else:
            result = run_sweep(params, seed, order)
    except PreconditionError as e:
        raise experiment.fail(str(e))
    except OSError as e:
        raise experiment.fail(f"I/O error: {e}")
    params.finish()
    return result
