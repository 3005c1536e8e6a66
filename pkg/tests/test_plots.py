import matplotlib

matplotlib.use("Agg")

from dynrms import engine, modal, plots
from dynrms.engine import Event, SimulationConfig
from dynrms.realtime import RealtimeSession


def test_trajectory_and_mode_figures(kundur, tmp_path):
    sysm, x0 = kundur
    cfg = SimulationConfig(t_end=2.0, dt=0.005)
    traj = engine.run_batch(sysm, x0, cfg, [Event(0.5, "fault_on", "B1"),
                                            Event(0.6, "fault_off", "B1")])
    fig = plots.trajectory_figure(traj)
    out = plots.save_figure(fig, tmp_path / "traj.png")
    assert out.is_file() and out.stat().st_size > 1000

    A = modal.numerical_jacobian(sysm, x0.values)
    lin = modal.eigenanalysis(A, sysm.allocation.state_names)
    out = plots.save_figure(plots.mode_map_figure(lin), tmp_path / "modes.png")
    assert out.is_file() and out.stat().st_size > 1000


def test_timing_figure(kundur, tmp_path):
    sysm, x0 = kundur
    session = RealtimeSession(sysm, x0, SimulationConfig(dt=0.005),
                              speed=10.0, t_end=0.1)
    stats = session.run()
    out = plots.save_figure(plots.timing_figure(stats), tmp_path / "timing.png")
    assert out.is_file() and out.stat().st_size > 1000
