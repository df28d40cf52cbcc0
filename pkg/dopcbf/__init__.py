"""dopcbf - safety filters with disturbance-observer-parameterized barriers

**dopcbf** builds CLF-CBF quadratic-program safety filters whose barrier
adapts to a disturbance observer's estimate, and runs them on an adaptive
cruise control vehicle driving over changing road grades.

Quick Start
-----------

```python
from dopcbf import ExperimentConfig, run_single

result = run_single(ExperimentConfig(controller="dopcbf"))
print(result.report.min_h, result.report.rms_du)
```

or from the shell:

```bash
dopcbf simulate --controller cbf --out out/cbf
dopcbf batch --n 100 --seed 42 --workers 4 --out out/batch
```

Package layout
--------------
- `core` plants, state and control types
- `integrator` RK4 closed-loop simulation with zero-order hold
- `qp` exact active-set solver for small QPs
- `observer` disturbance observer and its error envelope
- `safety_filter` CLF and barrier constraint rows, QP assembly
- `acc` cruise-control model, barriers and controllers
- `scenarios` road-grade profiles
- `metrics` smoothness, barrier minima, batch comparison
- `lexer`, `parser`, `document`, `ser` the experiment-file notation
- `config` experiment configuration and overrides
- `experiments` runs, batches, sweeps and their output files
- `plots` SVG figures of runs and sweeps
- `cli` command-line entry point
"""

from .config import ExperimentConfig, load_config
from .experiments import run_batch, run_single, sweep_sigma
from .parser import parse_reader, parse_str
from . import error

__version__ = "0.1.0"
__all__ = [
    "ExperimentConfig", "load_config", "run_single", "run_batch", "sweep_sigma",
    "parse_str", "parse_reader", "error",
]
