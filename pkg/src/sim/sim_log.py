"""Episode records and their CSV/JSON artifacts"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence
import logging
import numpy as np
import pandas as pd
from pydantic import BaseModel

logger = logging.getLogger(__name__)


class AuditSummary(BaseModel):
    """Monte Carlo soundness audit counts over an episode"""

    samples_per_step: int
    steps_audited: int = 0
    tube_violations: int = 0
    margin_violations: int = 0
    taylor_violations: int = 0


class EpisodeSummary(BaseModel):
    """Deterministic outcome of one episode"""

    scenario: str
    controller: str
    status: str
    seed: int
    noise_mode: str
    eps_x: float
    eps_u: float
    dt: float
    steps_completed: int
    integration_slack: float
    min_h: Dict[str, float]
    violation: Dict[str, bool]
    violated: bool
    min_h_overall: float
    qp_infeasible: bool
    audit: Optional[AuditSummary] = None


class TimingSummary(BaseModel):
    """Per-step wall time statistics in seconds"""

    steps: int
    mean: float
    p50: float
    p95: float
    max: float


@dataclass
class SimLog:
    """Fine-grid trajectory, per-step diagnostics and summaries"""

    trajectory: pd.DataFrame
    steps: pd.DataFrame
    summary: EpisodeSummary
    timing: TimingSummary

    def write(self, directory: Path) -> Dict[str, Path]:
        """
        Write trajectory.csv, steps.csv, summary.json and timing.json

        Args:
            directory: Output directory, created when missing

        Returns:
            Artifact name to path
        """
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = {
            "trajectory": directory / "trajectory.csv",
            "steps": directory / "steps.csv",
            "summary": directory / "summary.json",
            "timing": directory / "timing.json",
        }
        self.trajectory.to_csv(paths["trajectory"], index=False, float_format="%.17g")
        self.steps.to_csv(paths["steps"], index=False, float_format="%.17g")
        paths["summary"].write_text(self.summary.model_dump_json(indent=2) + "\n")
        paths["timing"].write_text(self.timing.model_dump_json(indent=2) + "\n")
        logger.info(f"Wrote episode artifacts to {directory}")
        return paths


class SimLogBuilder:
    """Accumulates records during an episode"""

    def __init__(self, scenario: str, controller: str, barrier_names: Sequence[str], n: int, m: int):
        """Initialize an empty log for the given barriers and dimensions"""
        self.scenario = scenario
        self.controller = controller
        self.names = list(barrier_names)
        self.n = n
        self.m = m
        self.fine: List[dict] = []
        self.records: List[dict] = []
        self.wall_times: List[float] = []
        self.audit: Optional[AuditSummary] = None
        self.qp_infeasible = False

    def add_fine(self, t: float, x: np.ndarray, h_values: np.ndarray) -> None:
        row = {"t": t}
        row.update({f"x{i + 1}": float(v) for i, v in enumerate(x)})
        row.update({f"h_{name}": float(v) for name, v in zip(self.names, h_values)})
        self.fine.append(row)

    def add_step(self, k, t, x, x_hat, d, u_nom, decision, e, wall_time: float) -> None:
        """Record one sampling instant; e is None when no input was applied"""
        row = {"step": k, "t": t}
        row.update({f"x{i + 1}": float(v) for i, v in enumerate(x)})
        row.update({f"xhat{i + 1}": float(v) for i, v in enumerate(x_hat)})
        row["d_norm"] = d.norm
        row["d_raw_norm"] = d.raw_norm
        u_desired = decision.u_desired
        u_applied = u_desired if e is None else u_desired + e.value
        for j in range(self.m):
            row[f"u_nom{j + 1}"] = float(u_nom[j])
            row[f"u_d{j + 1}"] = float(u_desired[j])
            row[f"u_r{j + 1}"] = float(u_applied[j])
        row["e_norm"] = 0.0 if e is None else e.norm
        row["e_raw_norm"] = 0.0 if e is None else e.raw_norm
        for name, margin in zip(self.names, decision.margins):
            row[f"phi_{name}"] = 0.0 if margin is None else margin.phi
            row[f"nodes_{name}"] = 0 if margin is None else margin.nodes
            row[f"converged_{name}"] = True if margin is None else margin.converged
        row["qp_feasible"] = decision.qp.feasible
        row["qp_active"] = " ".join(str(i) for i in decision.qp.active_set)
        row["qp_kkt"] = decision.qp.kkt_residual
        row["qp_iterations"] = decision.qp.iterations
        if decision.reach is not None:
            for i in range(self.n):
                row[f"reach_lo{i + 1}"] = float(decision.reach.hull.lo[i])
                row[f"reach_hi{i + 1}"] = float(decision.reach.hull.hi[i])
        row["wall_time"] = wall_time
        self.records.append(row)
        self.wall_times.append(wall_time)
        if not decision.qp.feasible:
            self.qp_infeasible = True

    def add_audit(self, counts) -> None:
        if self.audit is None:
            self.audit = AuditSummary(samples_per_step=counts.samples)
        self.audit.steps_audited += 1
        self.audit.tube_violations += counts.tube_violations
        self.audit.margin_violations += counts.margin_violations
        self.audit.taylor_violations += counts.taylor_violations

    def finish(self, status: str, seed: int, noise_mode: str, eps_x: float, eps_u: float, dt: float, slack: float) -> SimLog:
        trajectory = pd.DataFrame(self.fine)
        steps = pd.DataFrame(self.records)
        min_h = {name: float(trajectory[f"h_{name}"].min()) for name in self.names}
        violation = {name: value < -slack for name, value in min_h.items()}
        times = np.array(self.wall_times) if self.wall_times else np.zeros(1)
        summary = EpisodeSummary(
            scenario=self.scenario,
            controller=self.controller,
            status=status,
            seed=seed,
            noise_mode=noise_mode,
            eps_x=eps_x,
            eps_u=eps_u,
            dt=dt,
            steps_completed=sum(1 for r in self.records if r["qp_feasible"]),
            integration_slack=slack,
            min_h=min_h,
            violation=violation,
            violated=any(violation.values()),
            min_h_overall=min(min_h.values()),
            qp_infeasible=self.qp_infeasible,
            audit=self.audit,
        )
        timing = TimingSummary(
            steps=len(self.wall_times),
            mean=float(times.mean()),
            p50=float(np.percentile(times, 50)),
            p95=float(np.percentile(times, 95)),
            max=float(times.max()),
        )
        return SimLog(trajectory=trajectory, steps=steps, summary=summary, timing=timing)
