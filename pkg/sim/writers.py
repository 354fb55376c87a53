import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from rest_framework.renderers import JSONRenderer

from filters.models import FilterDecision

from .models import InvarianceReport, Scenario, TrajectoryLog
from .serializers import RunSummarySerializer


@dataclass(frozen=True)
class RunSummary:
    scenario: Scenario
    candidate: object
    invariance: InvarianceReport
    final_decision: Optional[FilterDecision] = None


def _cell(value) -> str:
    if isinstance(value, bool):
        return '1' if value else '0'
    return repr(float(value))


def write_csv(log: TrajectoryLog, stream) -> None:
    """One row per grid point; floats are written with ``repr`` so reruns compare byte for byte."""
    writer = csv.writer(stream, lineterminator='\n')
    writer.writerow(log.header)
    for row in log.rows():
        writer.writerow([_cell(value) for value in row])


def render_summary(summary: RunSummary) -> bytes:
    return JSONRenderer().render(RunSummarySerializer(summary).data, renderer_context={'indent': 2})


PLOT_TEMPLATE = '''\
"""Figures for {name}. Run with ``python {script}``."""
import csv

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np

with open({csv_path!r}, newline='') as f:
    rows = list(csv.reader(f))
header, data = rows[0], np.array(rows[1:], dtype=float)
column = {{name: data[:, i] for i, name in enumerate(header)}}
t = column['t']

fig, axes = plt.subplots(3, 1, sharex=True, figsize=(7, 8))
for name, label in {states!r}:
    axes[0].plot(t, column[name], label=label)
axes[0].set_ylabel('state')
axes[0].legend(loc='best')

axes[1].plot(t, column['psi'], label='psi')
axes[1].plot(t, column['h'], label='h')
axes[1].axhline(0.0, color='k', linewidth=0.5)
axes[1].set_ylabel('constraint')
axes[1].legend(loc='best')

for j in range({m}):
    axes[2].plot(t, column[f'u_des{{j + 1}}'], '--', label=f'u_des{{j + 1}}')
    axes[2].plot(t, column[f'u_safe{{j + 1}}'], label=f'u_safe{{j + 1}}')
axes[2].set_ylabel('input')
axes[2].set_xlabel('t [s]')
axes[2].legend(loc='best')

fig.tight_layout()
fig.savefig({figure!r}, dpi=150)
'''


def plot_script(log: TrajectoryLog, csv_path, name: str = '', script: str = 'plot.py') -> str:
    """Source of a standalone matplotlib script that draws the trajectory in ``csv_path``."""
    n = log.states.shape[1]
    labels = log.state_names or tuple(f'x{i + 1}' for i in range(n))
    # Positions only: the velocity half of a mechanical state clutters the figure.
    shown = range(n // 2) if n > 1 and n % 2 == 0 and labels[n // 2].startswith('qd') else range(n)
    states = [(f'x{i + 1}', labels[i]) for i in shown]
    csv_path = str(csv_path)
    return PLOT_TEMPLATE.format(name=name or Path(csv_path).stem, script=script, csv_path=csv_path,
                                states=states, m=log.u_safe.shape[1],
                                figure=str(Path(csv_path).with_suffix('.png')))
