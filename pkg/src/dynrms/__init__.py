"""Dynamic RMS (phasor) power system simulator.

Typical pipeline::

    from dynrms import data, network, engine

    sysd = data.load_model(data.fixture_path("kundur_two_area"))
    pf = network.solve_power_flow(sysd)
    sysm = engine.build(sysd, pf)
    x0 = sysm.initialize()
    trajectory = engine.run_batch(sysm, x0, events=[...])
"""

__version__ = "0.1.0"

from .data import (  # noqa: F401
    SystemDescription,
    fixture_path,
    load_model,
    parse_model,
    serialize_model,
    validate,
)
from .engine import (  # noqa: F401
    Event,
    OdeSystem,
    SimulationConfig,
    StateVector,
    build,
    run_batch,
)
from .modal import eigenanalysis, mode_report, numerical_jacobian  # noqa: F401
from .network import (  # noqa: F401
    build_ybus,
    kron_reduce,
    modify_admittance,
    solve_network,
    solve_power_flow,
)
