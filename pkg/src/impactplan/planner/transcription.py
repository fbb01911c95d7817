"""Direct transcription of the multi-mode halting/pushing problem.

Decision vector layout (blocks, each knot-major)::

    y, ydot, c, cdot, cddot, f, fdot, fddot   (N, nu) each
    dt                                        (N,)
    alpha, f_d                                (S,) each, one per contact stage

Interval ``i -> i+1`` is governed by the mode of knot ``i``. End-effector
velocity integration is skipped on make/break intervals, so velocity jumps
are admissible there while accelerations stay bounded everywhere else.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..contact import cdds_accel, cdds_propagate
from ..core import Mode, ModeSequence, Scenario, validate_scenario
from ..geometry import signed_distance_ad
from ..nlp import ad
from ..nlp.solver import NlpProblem

KNOT_BLOCKS = ("y", "ydot", "c", "cdot", "cddot", "f", "fdot", "fddot")
SEPARATION_MARGIN = 1e-4  # m, closes the strict free-motion inequality
BREAK_FORCE = 0.5  # N, force allowed at the last knot before separation


class TranscriptionError(ValueError):
    pass


@dataclass(frozen=True)
class Weights:
    force: float = 1.0
    accel: float = 0.1
    time: float = 1.0

    @classmethod
    def parse(cls, text: str) -> "Weights":
        parts = [float(p) for p in text.split(",")]
        if len(parts) != 3:
            raise ValueError("weights must be 'w_f,w_a,w_T'")
        return cls(*parts)


@dataclass(frozen=True)
class ConstraintBlock:
    name: str
    kind: str  # "eq", "ineq" or "fixed" (imposed through equal bounds)
    knots: tuple
    condition: str
    size: int


@dataclass
class TranscriptionLayout:
    n_knots: int
    nu: int
    n_stages: int
    offsets: dict
    n_vars: int
    knot_modes: list
    stage_of_knot: np.ndarray  # -1 for free knots
    stage_l: np.ndarray
    registry: list = field(default_factory=list)

    @property
    def n_knot_vars(self) -> int:
        return self.n_knots * (8 * self.nu + 1)

    @property
    def n_stage_vars(self) -> int:
        return 2 * self.n_stages

    def index(self, name: str, knot: int | None = None, axis: int = 0) -> int:
        start = self.offsets[name]
        if name in KNOT_BLOCKS:
            return start + knot * self.nu + axis
        return start + (0 if knot is None else knot)

    def slice(self, name: str) -> slice:
        start = self.offsets[name]
        if name in KNOT_BLOCKS:
            return slice(start, start + self.n_knots * self.nu)
        if name == "dt":
            return slice(start, start + self.n_knots)
        return slice(start, start + self.n_stages)

    def unpack(self, x) -> dict:
        out = {}
        for name in KNOT_BLOCKS:
            out[name] = x[self.slice(name)].reshape(self.n_knots, self.nu)
        for name in ("dt", "alpha", "f_d"):
            out[name] = x[self.slice(name)]
        return out

    def constraint_names(self, kind: str) -> list:
        return [b.name for b in self.registry if b.kind == kind]


def make_layout(nu: int, z: ModeSequence) -> TranscriptionLayout:
    modes = z.knot_modes()
    n = len(modes)
    offsets = {}
    pos = 0
    for name in KNOT_BLOCKS:
        offsets[name] = pos
        pos += n * nu
    offsets["dt"] = pos
    pos += n
    stage_of_mode = []
    stage_l = []
    for m in z.modes:
        if m.in_contact:
            stage_of_mode.append(len(stage_l))
            stage_l.append(m.l)
        else:
            stage_of_mode.append(-1)
    n_stages = len(stage_l)
    offsets["alpha"] = pos
    pos += n_stages
    offsets["f_d"] = pos
    pos += n_stages
    stage_of_knot = np.array(stage_of_mode, dtype=int)[z.knot_mode_index()]
    return TranscriptionLayout(
        n_knots=n,
        nu=nu,
        n_stages=n_stages,
        offsets=offsets,
        n_vars=pos,
        knot_modes=modes,
        stage_of_knot=stage_of_knot,
        stage_l=np.array(stage_l, dtype=int),
    )


def cone_generators(normal: np.ndarray, mu: float) -> np.ndarray:
    """Edge generators of the planar friction cone as columns ``[e+, e-]``."""
    n = np.asarray(normal, float)
    t = np.array([n[1], -n[0]])  # normal turned clockwise
    return np.column_stack([n + mu * t, n - mu * t])


def friction_cone_check(f, normal, mu: float):
    """Decompose ``f`` on the cone edges; inside iff all weights are >= 0.

    For a 1-D task the cone degenerates to the ray along ``normal`` and the
    single weight is the normal component.
    """
    f = np.atleast_1d(np.asarray(f, float))
    n = np.atleast_1d(np.asarray(normal, float))
    norm = np.linalg.norm(n)
    if norm == 0:
        raise ValueError("zero normal")
    n = n / norm
    if n.size == 1:
        w = np.array([float(f @ n)])
        return bool(w[0] >= 0), w
    w = np.linalg.solve(cone_generators(n, mu), f)
    inside = bool(np.all(w >= 0) and f @ n >= 0)
    return inside, w


def _cone_weights(f, normal, mu):
    """Vertex weights of each row of ``f`` (works on duals)."""
    n = np.asarray(normal, float)
    if n.size == 1:
        return f * n
    inv = np.linalg.inv(cone_generators(n, mu))
    # w_k = sum_j inv[k, j] f_j
    return ad.stack([f[:, 0] * inv[k, 0] + f[:, 1] * inv[k, 1] for k in range(2)], axis=1)


class Transcription:
    """Builds the NLP for a scenario and mode sequence.

    ``impact_aware=False`` drops the transmission ODE and its stage
    variables' influence: forces become free (bounded) contact variables.
    """

    def __init__(self, s: Scenario, z: ModeSequence, weights: Weights | None = None, impact_aware: bool = True):
        problems = validate_scenario(s) + z.violations()
        if problems:
            raise TranscriptionError("; ".join(problems))
        self.s = s
        self.z = z
        self.weights = weights or Weights()
        self.impact_aware = impact_aware
        self.layout = make_layout(s.nu, z)
        self.normal = s.normal()
        self.g_pt = s.contact_offset()
        self.mass = float(s.object.mass)
        # typical force magnitude: the momentum to remove over about a second
        self.force_scale = max(1.0, self.mass * float(np.linalg.norm(s.task.ydot0)))
        self._classify()
        self.lower, self.upper = self._bounds()
        self._register()

    # structure -------------------------------------------------------------

    def _classify(self):
        k = np.array([m.k for m in self.layout.knot_modes])
        self.k = k
        self.l = np.array([m.l for m in self.layout.knot_modes])
        n = len(k)
        iv = np.arange(n - 1)
        self.iv_make = iv[(k[:-1] == 0) & (k[1:] == 1)]
        self.iv_break = iv[(k[:-1] == 1) & (k[1:] == 0)]
        self.iv_skip = np.union1d(self.iv_make, self.iv_break)
        self.iv_smooth = np.setdiff1d(iv, self.iv_skip)
        self.iv_contact = iv[(k[:-1] == 1) & (k[1:] == 1)]
        self.kn_contact = np.nonzero(k == 1)[0]
        self.kn_free = np.nonzero(k == 0)[0]
        self.kn_contact_start = np.array([i for i in self.kn_contact if i == 0 or k[i - 1] == 0], dtype=int)
        self.kn_break = self.iv_break.copy()
        bounds = []
        for i in range(1, n):
            if self.l[i - 1] == -1 and self.l[i] == 1:
                bounds.append(i)
        self.kn_stage_boundary = np.array(bounds, dtype=int)

    def _bounds(self):
        L = self.layout
        s, task = self.s, self.s.task
        nu, n = L.nu, L.n_knots
        lo = np.full(L.n_vars, -np.inf)
        hi = np.full(L.n_vars, np.inf)

        def fix(name, knots, value):
            for i in knots:
                for a in range(nu):
                    j = L.index(name, i, a)
                    lo[j] = hi[j] = value[a] if np.ndim(value) else value

        def box(name, knots, low, high):
            for i in knots:
                for a in range(nu):
                    j = L.index(name, i, a)
                    lo[j] = low[a] if np.ndim(low) else low
                    hi[j] = high[a] if np.ndim(high) else high

        allk = range(n)
        box("c", allk, s.workspace.lower, s.workspace.upper)
        box("cddot", allk, -task.accel_max, task.accel_max)
        box("f", allk, -task.f_max, task.f_max)
        lo[L.slice("dt")], hi[L.slice("dt")] = task.dt_bounds
        lo[L.slice("alpha")], hi[L.slice("alpha")] = task.alpha_bounds
        lo[L.slice("f_d")], hi[L.slice("f_d")] = 0.0, task.f_max
        for name in ("f", "fdot", "fddot"):
            fix(name, self.kn_free, 0.0)
        if self.impact_aware:
            fix("f", self.kn_contact_start, 0.0)
            fix("fdot", self.kn_contact_start, 0.0)
        else:
            fix("fdot", allk, 0.0)
            fix("fddot", allk, 0.0)
            lo[L.slice("alpha")] = hi[L.slice("alpha")] = task.alpha_bounds[1]
            lo[L.slice("f_d")] = hi[L.slice("f_d")] = 0.0
        fix("y", [0], task.y0)
        fix("ydot", [0], task.ydot0)
        if task.yN is not None:
            fix("y", [n - 1], task.yN)
        if task.ydotN is not None:
            fix("ydot", [n - 1], task.ydotN)
        return lo, hi

    def _register(self):
        nu = self.layout.nu
        reg = []

        def add(name, kind, knots, cond, per=nu):
            knots = tuple(int(i) for i in knots)
            if knots:
                reg.append(ConstraintBlock(name, kind, knots, cond, per * len(knots)))

        n = self.layout.n_knots
        iv = range(n - 1)
        add("initial_state", "fixed", [0], "all", 2 * nu)
        if self.s.task.yN is not None or self.s.task.ydotN is not None:
            add("final_state", "fixed", [n - 1], "all", nu)
        add("workspace_box", "fixed", range(n), "all")
        add("dt_bounds", "fixed", range(n), "all", 1)
        add("free_force_zero", "fixed", self.kn_free, "k=0", 3 * nu)
        add("object_velocity", "eq", iv, "all (force term iff k=1)")
        add("object_position", "eq", iv, "all")
        add("ee_velocity", "eq", self.iv_smooth, "no contact change")
        add("ee_position", "eq", self.iv_smooth, "no contact change")
        add("ee_position_skip", "eq", self.iv_skip, "k_i != k_i+1")
        if self.impact_aware:
            add("force_start", "fixed", self.kn_contact_start, "first contact knot", 2 * nu)
            add("force_ode", "eq", self.iv_contact, "k_i = k_i+1 = 1", 2 * nu)
            add("force_accel", "eq", self.kn_contact, "k=1")
        add("contact_location", "eq", self.kn_contact, "k=1")
        add("stage_boundary", "eq", self.kn_stage_boundary, "l: -1 -> +1", 1)
        add("separation", "ineq", self.kn_free, "k=0", 1)
        add("friction_cone", "ineq", self.kn_contact, "k=1", 1 if nu == 1 else 2)
        add("contact_break", "ineq", self.kn_break, "k_i=1, k_i+1=0", 1)
        self.layout.registry = reg

    # functions ------------------------------------------------------------

    def stage_params(self, v):
        """Per-knot (alpha, f_d * normal) for contact knots."""
        st = self.layout.stage_of_knot
        idx = self.kn_contact
        alpha = v["alpha"][st[idx]].reshape(len(idx), 1)
        fd = v["f_d"][st[idx]].reshape(len(idx), 1) * self.normal
        return alpha, fd

    def objective(self, x):
        v = self.layout.unpack(x)
        w = self.weights
        dt = v["dt"]
        f2 = ad.dot_last(v["f"], v["f"])
        a2 = ad.dot_last(v["cddot"], v["cddot"])
        return (w.force * f2 * dt + w.accel * a2 * dt + w.time * dt).sum()

    def eq_constraints(self, x):
        v = self.layout.unpack(x)
        parts = []
        y, yd, c, cd, cdd = v["y"], v["ydot"], v["c"], v["cdot"], v["cddot"]
        f, fd, fdd = v["f"], v["fdot"], v["fddot"]
        dt = v["dt"].reshape(-1, 1)
        a, b = slice(0, -1), slice(1, None)
        h = dt[a]
        # object: trapezoidal quadrature; free knots carry f = 0
        parts.append(yd[b] - yd[a] - h * (f[a] + f[b]) / (2.0 * self.mass))
        parts.append(y[b] - y[a] - 0.5 * h * (yd[a] + yd[b]))
        sm = self.iv_smooth
        if sm.size:
            hs = dt[sm]
            parts.append(cd[sm + 1] - cd[sm] - 0.5 * hs * (cdd[sm] + cdd[sm + 1]))
            parts.append(c[sm + 1] - c[sm] - 0.5 * hs * (cd[sm] + cd[sm + 1]))
        sk = self.iv_skip
        if sk.size:
            parts.append(c[sk + 1] - c[sk] - dt[sk] * cd[sk])
        if self.impact_aware and self.kn_contact.size:
            alpha, fdn = self.stage_params(v)
            pos = {int(i): j for j, i in enumerate(self.kn_contact)}
            ic = self.iv_contact
            if ic.size:
                rows = np.array([pos[int(i)] for i in ic])
                f1, fd1 = cdds_propagate(f[ic], fd[ic], alpha[rows], fdn[rows], dt[ic])
                parts.append((f[ic + 1] - f1) / self.force_scale)
                parts.append((fd[ic + 1] - fd1) / (10.0 * self.force_scale))
            kc = self.kn_contact
            parts.append((fdd[kc] - cdds_accel(f[kc], fd[kc], alpha, fdn)) / (100.0 * self.force_scale))
        kc = self.kn_contact
        if kc.size:
            parts.append(c[kc] - (y[kc] + self.g_pt))
        sb = self.kn_stage_boundary
        if sb.size:
            parts.append(ad.dot_last(yd[sb], self.normal).reshape(-1, 1))
        return ad.concatenate([p.reshape(-1) if ad.is_dual(p) else np.ravel(p) for p in parts])

    def ineq_constraints(self, x):
        v = self.layout.unpack(x)
        parts = []
        kf = self.kn_free
        if kf.size:
            pts = self.s.ee_point(v["c"][kf], v["y"][kf])
            parts.append(signed_distance_ad(self.s.object.surface, pts) - SEPARATION_MARGIN)
        kc = self.kn_contact
        if kc.size:
            parts.append(_cone_weights(v["f"][kc], self.normal, self.s.task.friction_mu).reshape(-1))
        kb = self.kn_break
        if kb.size:
            parts.append(BREAK_FORCE**2 - ad.dot_last(v["f"][kb], v["f"][kb]))
        if not parts:
            return np.zeros(0)
        return ad.concatenate([p.reshape(-1) if ad.is_dual(p) else np.ravel(p) for p in parts])

    def constraint_rows(self, kind: str) -> list:
        """``(block name, row count)`` in the order the constraint vector is built."""
        nu = self.layout.nu
        n = self.layout.n_knots
        ic, kc = self.iv_contact.size, self.kn_contact.size
        if kind == "eq":
            rows = [
                ("object_velocity", (n - 1) * nu),
                ("object_position", (n - 1) * nu),
                ("ee_velocity", self.iv_smooth.size * nu),
                ("ee_position", self.iv_smooth.size * nu),
                ("ee_position_skip", self.iv_skip.size * nu),
            ]
            if self.impact_aware and kc:
                if ic:
                    rows += [("force_ode", ic * nu), ("force_ode_rate", ic * nu)]
                rows.append(("force_accel", kc * nu))
            rows += [("contact_location", kc * nu), ("stage_boundary", self.kn_stage_boundary.size)]
        else:
            rows = [
                ("separation", self.kn_free.size),
                ("friction_cone", kc * (1 if nu == 1 else 2)),
                ("contact_break", self.kn_break.size),
            ]
        return [(name, cnt) for name, cnt in rows if cnt]

    def diagnostics(self, x) -> dict:
        """Largest violation per constraint block and for the variable bounds."""
        _, h, g = self.problem().evaluate(x)
        out = {}
        for kind, vals, viol in (("eq", h, np.abs), ("ineq", g, lambda v: np.maximum(-v, 0.0))):
            pos = 0
            for name, cnt in self.constraint_rows(kind):
                out[name] = float(np.max(viol(vals[pos : pos + cnt]), initial=0.0))
                pos += cnt
        out["bounds"] = float(np.max(np.maximum(self.lower - x, 0.0) + np.maximum(x - self.upper, 0.0), initial=0.0))
        return out

    def x_scale(self) -> np.ndarray:
        L = self.layout
        F = self.force_scale
        sc = np.ones(L.n_vars)
        sc[L.slice("cddot")] = 1.0
        sc[L.slice("f")] = F
        sc[L.slice("fdot")] = 10.0 * F
        sc[L.slice("fddot")] = 100.0 * F
        sc[L.slice("dt")] = 0.05
        sc[L.slice("alpha")] = 10.0
        sc[L.slice("f_d")] = F
        return sc

    def obj_scale(self) -> float:
        """Objective magnitude at the initial guess, so the scaled objective is O(1)."""
        return max(1.0, float(np.asarray(self.objective(self.warm_start())).ravel()[0]))

    def problem(self) -> NlpProblem:
        return NlpProblem(
            n_vars=self.layout.n_vars,
            lower=self.lower,
            upper=self.upper,
            objective=self.objective,
            eq_constraints=self.eq_constraints,
            ineq_constraints=self.ineq_constraints,
            x_scale=self.x_scale(),
            obj_scale=self.obj_scale(),
            sparse=True,
        )

    # initial guess ----------------------------------------------------------

    def initial_guess(self) -> np.ndarray:
        """Plain starting point: interpolated object motion, zero forces.

        The end-effector rides on the contact point in contact and stands
        0.1 m off along the normal otherwise.
        """
        L = self.layout
        task = self.s.task
        n = L.n_knots
        x = np.zeros(L.n_vars)
        dt_mid = 0.5 * (task.dt_bounds[0] + task.dt_bounds[1])
        t = dt_mid * np.arange(n)
        frac = np.linspace(0.0, 1.0, n)[:, None]
        if task.yN is not None:
            y = task.y0 + frac * (task.yN - task.y0)
        else:
            y = task.y0 + t[:, None] * task.ydot0
        vN = task.ydotN if task.ydotN is not None else task.ydot0
        yd = task.ydot0 + frac * (vN - task.ydot0)
        c = y + self.g_pt
        c[self.kn_free] -= 0.1 * self.normal
        for name, val in (("y", y), ("ydot", yd), ("c", c)):
            x[L.slice(name)] = val.ravel()
        x[L.slice("dt")] = dt_mid
        a_lo, a_hi = task.alpha_bounds
        x[L.slice("alpha")] = np.sqrt(a_lo * a_hi)
        # boundary values are pinned by equal bounds; respect them exactly
        fixed = self.lower == self.upper
        x[fixed] = self.lower[fixed]
        return x

    def warm_start(self) -> np.ndarray:
        """Dynamically consistent starting point.

        Forces are rolled out through the exact transmission map with a
        fixed rate per stage; each stage's desired force is then solved for
        (the rollout is affine in it) so the stage meets its velocity or
        position target. Contact knots ride on the object, so the
        end-effector equations hold exactly there.
        """
        L = self.layout
        task = self.s.task
        n, nu = L.n_knots, L.nu
        nrm = self.normal
        m = self.mass
        t_lo, t_hi = task.dt_bounds
        a_lo, a_hi = task.alpha_bounds
        dt = np.full(n, np.clip(0.02, t_lo, t_hi))
        st = L.stage_of_knot
        for s_idx in range(L.n_stages):
            cnt = int(np.sum(st == s_idx))
            dt[st == s_idx] = np.clip(0.6 / max(cnt, 1), t_lo, t_hi)
        alpha = np.full(L.n_stages, a_hi if not self.impact_aware else np.clip(10.0, a_lo, a_hi))
        f_d = np.zeros(L.n_stages)

        def rollout(f_d):
            y = np.zeros((n, nu))
            yd = np.zeros((n, nu))
            f = np.zeros(n)
            fd = np.zeros(n)
            y[0], yd[0] = task.y0, task.ydot0
            if not self.impact_aware:
                # no transmission model: a constant force per contact stage
                f[st >= 0] = f_d[st[st >= 0]]
            for i in range(n - 1):
                si, sj = st[i], st[i + 1]
                if self.impact_aware and si >= 0 and sj >= 0:
                    f[i + 1], fd[i + 1] = cdds_propagate(f[i], fd[i], alpha[si], f_d[si], dt[i])
                yd[i + 1] = yd[i] + dt[i] * (f[i] + f[i + 1]) * nrm / (2.0 * m)
                y[i + 1] = y[i] + 0.5 * dt[i] * (yd[i] + yd[i + 1])
            return y, yd, f, fd

        def residual(f_d, s_idx):
            y, yd, _, _ = rollout(f_d)
            knots = np.nonzero(st == s_idx)[0]
            nxt = knots[-1] + 1
            if L.stage_l[s_idx] == -1 and nxt < n and st[nxt] >= 0:
                return float(yd[nxt] @ nrm)  # come to rest before pushing
            if task.yN is not None:
                return float((y[-1] - task.yN) @ nrm)
            vN = task.ydotN if task.ydotN is not None else np.zeros(nu)
            return float((yd[-1] - vN) @ nrm)

        lo_fd = 0.0 if self.impact_aware else -task.f_max
        for s_idx in range(L.n_stages):
            r0 = residual(f_d, s_idx)
            trial = f_d.copy()
            trial[s_idx] += 1.0
            slope = residual(trial, s_idx) - r0
            if slope != 0:
                f_d[s_idx] = np.clip(f_d[s_idx] - r0 / slope, lo_fd, task.f_max)
        y, yd, f, fd = rollout(f_d)
        fdd = np.zeros(n)
        kc = self.kn_contact
        if kc.size and self.impact_aware:
            fdd[kc] = cdds_accel(f[kc], fd[kc], alpha[st[kc]], f_d[st[kc]])
        c = y + self.g_pt
        cd = yd.copy()
        cdd = np.outer(f, nrm) / m
        x = np.zeros(L.n_vars)
        for name, val in (
            ("y", y), ("ydot", yd), ("c", c), ("cdot", cd), ("cddot", cdd),
            ("f", np.outer(f, nrm)), ("fdot", np.outer(fd, nrm)), ("fddot", np.outer(fdd, nrm)),
        ):
            x[L.slice(name)] = val.ravel()
        x[L.slice("dt")] = dt
        x[L.slice("alpha")] = alpha
        x[L.slice("f_d")] = f_d
        return np.clip(x, self.lower, self.upper)


def transcribe(s: Scenario, z: ModeSequence, weights: Weights | None = None, impact_aware: bool = True):
    """Return ``(NlpProblem, TranscriptionLayout)``."""
    tr = Transcription(s, z, weights, impact_aware)
    return tr.problem(), tr.layout


def initial_guess(s: Scenario, z: ModeSequence) -> np.ndarray:
    return Transcription(s, z).initial_guess()
