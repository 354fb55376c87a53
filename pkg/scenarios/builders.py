"""Turn a validated scenario tree into domain objects."""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from core.exceptions import ScenarioConfigError
from lie.models import actuated_output, coordinate_output
from sim.models import Gains, Scenario
from sim.nominal import PdChannel, PdController, ZeroController
from synthesis import constraints
from synthesis.backstepping import rank_domain, state_domain_for
from synthesis.models import ClassKInfinity
from systems.domains import Box, SamplingPlan
from systems.models import LagrangianSystem
from systems.zoo import load_model


@dataclass(frozen=True)
class BuiltScenario:
    scenario: Scenario
    gradient_plan: SamplingPlan
    rank_plan: SamplingPlan
    cbf_plan: SamplingPlan
    cbf_inflation: float
    config: dict


def state_dimension(system) -> int:
    return 2 * system.n if isinstance(system, LagrangianSystem) else system.n


def build_output(section: dict, system):
    lagrangian = isinstance(system, LagrangianSystem)
    if section['domain'] == 'configuration' and not lagrangian:
        raise ScenarioConfigError(f'{system.name} has no configuration; use domain: state.', field='output.domain')
    if section['kind'] == 'actuated':
        B = system.B(np.zeros(system.n))
        domain = system.configuration_domain
        if any(not np.allclose(system.B(np.asarray(q, dtype=float)), B) for q in (domain.low, domain.high)):
            raise ScenarioConfigError(f'{system.name} has a configuration dependent B; actuated outputs need '
                                      'a constant one.', field='output.kind')
        return actuated_output(B, name=section['name'] or 'B^T q')
    arity = system.n if section['domain'] == 'configuration' else state_dimension(system)
    bad = [i for i in section['indices'] if i >= arity]
    if bad:
        raise ScenarioConfigError(f'Output indices {bad} exceed the {section["domain"]} dimension {arity}.',
                                  field='output.indices')
    return coordinate_output(section['indices'], arity, section['relative_degree'], section['domain'],
                             name=section['name'])


def build_constraint(section: dict, p: int):
    kind, name = section['kind'], section['name']
    if kind in ('upper_bound', 'lower_bound') and p != 1:
        raise ScenarioConfigError(f'{kind} constraints need a scalar output, got p = {p}.', field='constraint.kind')
    if kind in ('band', 'ellipse') and len(section['center']) != p:
        raise ScenarioConfigError(f'Constraint center has {len(section["center"])} entries, output has {p}.',
                                  field='constraint.center')
    if kind == 'upper_bound':
        return constraints.upper_bound(section['limit'], section['low'], name=name)
    if kind == 'lower_bound':
        return constraints.lower_bound(section['limit'], section['high'], name=name)
    if kind == 'band':
        return constraints.band(section['center'], section['radius'], name=name)
    return constraints.ellipse(section['center'], section['radii'], name=name)


def build_gains(section: dict) -> Gains:
    alpha = ClassKInfinity(section['alpha']['kind'], section['alpha']['slope'])
    return Gains(alpha, tuple(section['mu']), tuple(section['lambda']), section['sigma'])


def build_nominal(section: dict, system):
    n_state = state_dimension(system)
    if section['kind'] == 'zero':
        return ZeroController(system.m)
    channels = section['channels']
    if len(channels) != system.m:
        raise ScenarioConfigError(f'{system.name} has {system.m} input(s), got {len(channels)} channel(s).',
                                  field='nominal.channels')
    for index, channel in enumerate(channels):
        if max(channel['position_index'], channel['velocity_index']) >= n_state:
            raise ScenarioConfigError(f'Channel indices exceed the state dimension {n_state}.',
                                      field=f'nominal.channels.{index}')
    return PdController(tuple(PdChannel(**channel) for channel in channels))


def rank_box(section: dict, system, output, constraint) -> Box:
    if 'low' not in section:
        return rank_domain(system, output, constraint)
    expected = rank_domain(system, output, constraint).dim
    if len(section['low']) != expected:
        raise ScenarioConfigError(f'Rank box needs {expected} entries, got {len(section["low"])}.',
                                  field='verification.rank.low')
    return Box(section['low'], section['high'])


def build_scenario(config: dict, seed: Optional[int] = None, dt=None, horizon=None,
                   filter_enabled=None) -> BuiltScenario:
    """``seed``, ``dt``, ``horizon`` and ``filter_enabled`` override the file when given."""
    _, system, params = load_model(config['model']['name'], config['model']['params'])
    output = build_output(config['output'], system)
    constraint = build_constraint(config['constraint'], output.p)
    simulation, verification = config['simulation'], config['verification']
    seed = verification['seed'] if seed is None else seed

    scenario = Scenario(
        name=config['name'],
        model=config['model']['name'],
        params=params,
        system=system,
        output=output,
        constraint=constraint,
        gains=build_gains(config['gains']),
        nominal=build_nominal(config['nominal'], system),
        initial_state=tuple(simulation['initial_state']),
        horizon=simulation['horizon_s'] if horizon is None else horizon,
        dt=simulation['dt_s'] if dt is None else dt,
        filter_enabled=simulation['filter'] if filter_enabled is None else filter_enabled,
        seed=seed,
    )
    gradient, rank, cbf = verification['gradient'], verification['rank'], verification['cbf']
    box = rank_box(rank, system, output, constraint)
    return BuiltScenario(
        scenario=scenario,
        gradient_plan=SamplingPlan(constraint.d1_domain, gradient['samples'], gradient['method'], seed),
        rank_plan=SamplingPlan(box, rank['samples'], rank['method'], seed),
        cbf_plan=SamplingPlan(state_domain_for(system, box, cbf['velocity_limit']), cbf['samples'],
                              cbf['method'], seed),
        cbf_inflation=cbf['inflation'],
        config=config,
    )


def check_initial_state(scenario: Scenario) -> None:
    expected = state_dimension(scenario.system)
    if len(scenario.initial_state) != expected:
        raise ScenarioConfigError(f'simulation.initial_state needs {expected} entries, '
                                  f'got {len(scenario.initial_state)}.', field='simulation.initial_state')
