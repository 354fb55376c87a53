"""
Synthesis pipeline: gradient condition, rank condition, construction, barrier check.

Stages run in order and stop at the first failure; the failing stage is
named in the result.
"""
import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Optional

from core.exceptions import BarrierError, GradientConditionViolated
from filters.verification import verify_cbf_condition
from lie.models import RankReport
from lie.verification import verify_relative_degree
from sim.runner import build_candidate
from synthesis.models import CbfCandidate, ConditionReport
from synthesis.sontag import check_gradient_condition, sontag_controller, verify_sontag_condition
from systems.dynamics import to_control_affine
from systems.models import LagrangianSystem

from .builders import BuiltScenario

logger = logging.getLogger(__name__)

STAGES = ('gradient', 'rank', 'build', 'verify')


@dataclass
class StageResult:
    name: str
    passed: bool
    detail: str = ''


@dataclass
class PipelineResult:
    scenario: str
    stages: list = field(default_factory=list)
    sontag_report: Optional[ConditionReport] = None
    rank_report: Optional[RankReport] = None
    candidate: Optional[CbfCandidate] = None
    cbf_report: Optional[ConditionReport] = None

    @property
    def passed(self) -> bool:
        return all(stage.passed for stage in self.stages)

    @property
    def failed_stage(self) -> Optional[str]:
        return next((stage.name for stage in self.stages if not stage.passed), None)


def _gradient(built: BuiltScenario, result: PipelineResult) -> StageResult:
    scenario = built.scenario
    try:
        checked = check_gradient_condition(scenario.constraint, built.gradient_plan)
    except GradientConditionViolated as exc:
        return StageResult('gradient', False, exc.detail)
    controller = sontag_controller(scenario.constraint, scenario.gains.alpha, scenario.gains.sigma)
    result.sontag_report = verify_sontag_condition(controller, built.gradient_plan)
    if not result.sontag_report.passed:
        return StageResult('gradient', False, f'Sontag margin fails at {result.sontag_report.violations} '
                                              f'of {result.sontag_report.sampled} samples.')
    return StageResult('gradient', True, f'Gradient non-vanishing at {checked} boundary samples.')


def _rank(built: BuiltScenario, result: PipelineResult) -> StageResult:
    scenario = built.scenario
    system = scenario.system
    affine = to_control_affine(system) if isinstance(system, LagrangianSystem) else system
    try:
        affine.check_domain(built.rank_plan.with_box(built.cbf_plan.box).points())
    except BarrierError as exc:
        return StageResult('rank', False, f'[{exc.code}] {exc.detail}')
    report = verify_relative_degree(scenario.system, scenario.output, built.rank_plan)
    result.rank_report = report
    if not report.passed:
        return StageResult('rank', False, f'Relative degree {scenario.output.gamma} fails: '
                                          f'min singular value {report.min_singular_value:.3e}.')
    return StageResult('rank', True, f'Min singular value {report.min_singular_value:.3e}.')


def _build(built: BuiltScenario, result: PipelineResult) -> StageResult:
    try:
        candidate = build_candidate(built.scenario)
    except (BarrierError, ValueError) as exc:
        return StageResult('build', False, str(exc))
    result.candidate = dataclasses.replace(candidate, rank_report=result.rank_report)
    return StageResult('build', True, f'{candidate.form} candidate {candidate.barrier.name}.')


def _verify(built: BuiltScenario, result: PipelineResult) -> StageResult:
    report = verify_cbf_condition(result.candidate, built.cbf_plan, inflation=built.cbf_inflation)
    result.cbf_report = report
    if not report.passed:
        return StageResult('verify', False, f'Barrier condition fails at {report.violations} '
                                            f'of {report.accepted} samples.')
    return StageResult('verify', True, f'Min margin {report.min_margin:.3e} over {report.accepted} samples.')


RUNNERS = {'gradient': _gradient, 'rank': _rank, 'build': _build, 'verify': _verify}


def run_pipeline(built: BuiltScenario, stages=STAGES) -> PipelineResult:
    result = PipelineResult(built.scenario.name)
    for name in stages:
        stage = RUNNERS[name](built, result)
        result.stages.append(stage)
        if stage.passed:
            logger.info('%s: %s stage passed. %s', result.scenario, name, stage.detail)
        else:
            logger.warning('%s: %s stage failed. %s', result.scenario, name, stage.detail)
            break
    return result
