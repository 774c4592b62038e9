"""Run configuration: a flat JSON file with dotted keys.

Every experiment is described by one diff-able file; unknown keys are
rejected and physical parameters are range-checked at load time.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from .errors import ConfigError

_POS = "positive"
_UNIT = "in [0, 1]"
_OPEN_UNIT = "in (0, 1)"
_FRAC = "in [0, 1)"

# key -> (default, validator description, predicate)
SCHEMA = {
    "model.a": (0.95, "abs < 1", lambda v: abs(v) < 1),
    "model.c": (1.0, "nonzero", lambda v: v != 0),
    "model.sigma_w2": (0.25, _POS, lambda v: v > 0),
    "model.sigma_v2": (0.01, _POS, lambda v: v > 0),
    "model.x0_mean": (0.0, "finite", lambda v: abs(v) < 1e300),
    "model.P_x0": (1.0, _POS, lambda v: v > 0),
    "quantizer.family": ("lloyd-max", "lloyd-max or lattice",
                         lambda v: v in ("lloyd-max", "lattice")),
    "quantizer.target_trace": (0.01, _POS, lambda v: v > 0),
    "channel.p": (0.2, _OPEN_UNIT, lambda v: 0 < v < 1),
    "channel.N0": (0.01, _POS, lambda v: v > 0),
    "channel.eta": (0.0, _UNIT, lambda v: 0 <= v <= 1),
    "channel.delta": (0.0, _UNIT, lambda v: 0 <= v <= 1),
    "cost.lambda": (0.6, _UNIT, lambda v: 0 <= v <= 1),
    "cost.energy_scale": (1.0, _POS, lambda v: v > 0),
    "policy.kind": ("optimal", "one of fixed0/fixed1/threshold/optimal/"
                    "suboptimal/belief",
                    lambda v: v in ("fixed0", "fixed1", "threshold",
                                    "optimal", "suboptimal", "belief")),
    "policy.phi": (0.5, "finite", lambda v: abs(v) < 1e300),
    "sim.steps": (100_000, ">= 1", lambda v: v >= 1),
    "sim.seed": (0, "64-bit", lambda v: 0 <= v < 2 ** 64),
    "sim.runs": (50, ">= 1", lambda v: v >= 1),
    "sim.burn_in": (0.1, _FRAC, lambda v: 0 <= v < 1),
    "solver.grid_lo": (None, "null or >= P_s", lambda v: v is None or v >= 0),
    "solver.grid_hi": (2.0, _POS, lambda v: v > 0),
    "solver.grid_count": (40, ">= 2", lambda v: v >= 2),
    "solver.tol": (1e-10, _POS, lambda v: v > 0),
    "solver.max_iter": (200_000, ">= 1", lambda v: v >= 1),
    "solver.successor": ("expected", "expected or per-gamma",
                         lambda v: v in ("expected", "per-gamma")),
    "spsa.omega": (0.3, _POS, lambda v: v > 0),
    "spsa.sigma": (0.5, _POS, lambda v: v > 0),
    "spsa.kappa": (1.0, "in (0.5, 1]", lambda v: 0.5 < v <= 1),
    "spsa.iters": (300, ">= 1", lambda v: v >= 1),
    "spsa.starts": (8, ">= 1", lambda v: v >= 1),
    "spsa.evaluator": ("bellman", "bellman or mc",
                       lambda v: v in ("bellman", "mc")),
    "spsa.horizon": (50, ">= 1", lambda v: v >= 1),
    "belief.samples": (2000, ">= 2", lambda v: v >= 2),
    "belief.horizon": (30, ">= 1", lambda v: v >= 1),
}

_INT_KEYS = {"sim.steps", "sim.seed", "sim.runs", "solver.grid_count",
             "solver.max_iter", "spsa.iters", "spsa.starts", "spsa.horizon",
             "belief.samples", "belief.horizon"}
_STR_KEYS = {"quantizer.family", "policy.kind", "solver.successor",
             "spsa.evaluator"}


@dataclass(frozen=True)
class RunConfig:
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    @property
    def hash(self):
        canon = json.dumps(self.values, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:12]

    @classmethod
    def from_dict(cls, raw):
        unknown = sorted(set(raw) - set(SCHEMA))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        values = {}
        for key, (default, desc, pred) in SCHEMA.items():
            v = raw.get(key, default)
            if key in _STR_KEYS:
                if not isinstance(v, str):
                    raise ConfigError(f"{key} must be a string")
            elif v is not None:
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    raise ConfigError(f"{key} must be a number")
                v = int(v) if key in _INT_KEYS else float(v)
            if not pred(v):
                raise ConfigError(f"{key}={v!r} out of range (expected {desc})")
            values[key] = v
        return cls(values=values)

    @classmethod
    def load(cls, path):
        try:
            with open(path) as f:
                raw = json.load(f)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(raw)


def build_system(cfg):
    """Instantiate model, steady state, rate plan, channels, augmented model
    and the DP grid from a validated config."""
    from .augmented import AugmentedModel
    from .channel import FeedbackChannel, ForwardChannel
    from .lti import SystemModel, solve_dare
    from .policy import CovGrid
    from .quantizer import Family, QuantizerSpec, select_rates

    model = SystemModel.scalar(a=cfg["model.a"], c=cfg["model.c"],
                               sigma_w2=cfg["model.sigma_w2"],
                               sigma_v2=cfg["model.sigma_v2"],
                               x0_mean=cfg["model.x0_mean"],
                               p_x0=cfg["model.P_x0"])
    ss = solve_dare(model)
    spec = QuantizerSpec(family=Family(cfg["quantizer.family"]))
    plan = select_rates(spec, ss, cfg["quantizer.target_trace"])
    fwd = ForwardChannel.from_loss_prob(cfg["channel.p"], plan.n0, plan.n1,
                                        cfg["channel.N0"])
    fb = FeedbackChannel(eta=cfg["channel.eta"], delta=cfg["channel.delta"])
    aug = AugmentedModel.build(model, ss, plan)
    grid = CovGrid.build(ss, lo=cfg["solver.grid_lo"],
                         hi=cfg["solver.grid_hi"],
                         count=cfg["solver.grid_count"])
    return model, ss, plan, fwd, fb, aug, grid
