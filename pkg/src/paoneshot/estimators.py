"""Estimators of the attachment function ``A_k``.

* :func:`estimate_baseline` -- tail ratio ``sum_{j>k} n_j / n_k`` from one snapshot.
* :func:`estimate_oneshot` -- the same ratio corrected by simulated existence
  probabilities ``p_k = P(n_k(T) > 0)``.
* :func:`estimate_oneshot_binned` -- the corrected estimator with ``A`` held
  constant over contiguous degree bins.
* :func:`estimate_mle_full` -- maximum likelihood from a complete growth trace.
* :func:`estimate_pt_window` -- sliding-window node-arrival rate.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from .net_core import (DataError, DegreeHistogram, EventSequence,
                       GrowthTrace, NumericError, ParseError, Snapshot)
from .sg_sim import (AttachmentFunction, Constant, Schedule, Sequence, Tabulated,
                     hat_p, run_parallel, seed_sequence, simulate_counts)


@dataclass
class AttachmentEstimate:
    """Per-degree (or per-bin) estimates ``A_hat``.

    ``k`` holds the degree of each record; for binned estimates ``k_hi`` holds
    the last degree of the bin.  ``sd`` is a standard deviation of ``log A_hat``.
    """

    method: str
    k: np.ndarray
    A_hat: np.ndarray
    n_k: np.ndarray
    tail_k: np.ndarray
    sd: Optional[np.ndarray] = None
    p_hat: Optional[np.ndarray] = None
    flags: Optional[list] = None
    k_hi: Optional[np.ndarray] = None
    reference_degree: Optional[int] = None
    config: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.k = np.asarray(self.k, dtype=np.int64)
        self.A_hat = np.asarray(self.A_hat, dtype=np.float64)
        self.n_k = np.asarray(self.n_k, dtype=np.int64)
        self.tail_k = np.asarray(self.tail_k, dtype=np.int64)
        if self.flags is None:
            self.flags = [""] * len(self.k)

    def __len__(self):
        return len(self.k)

    @property
    def binned(self) -> bool:
        return self.k_hi is not None

    def centers(self) -> np.ndarray:
        """Degree used as the abscissa of each record in parametric fits."""
        if self.k_hi is None:
            return self.k.astype(np.float64)
        lo = np.maximum(self.k, 1).astype(np.float64)
        hi = np.maximum(self.k_hi, 1).astype(np.float64)
        return np.sqrt(lo * hi)

    def normalized(self, reference: Optional[int] = None) -> "AttachmentEstimate":
        """Copy rescaled so ``A_hat`` equals 1 at the reference degree.

        The default reference is degree 1 when it carries a positive estimate,
        otherwise the smallest degree that does.
        """
        if reference is None:
            reference = default_reference(self.k, self.A_hat)
        idx = np.flatnonzero(self.k == reference)
        if idx.size == 0 or not self.A_hat[idx[0]] > 0:
            raise NumericError(f"no positive estimate at degree {reference}")
        out = _copy(self)
        out.A_hat = self.A_hat / self.A_hat[idx[0]]
        out.A_hat[idx[0]] = 1.0
        out.reference_degree = int(reference)
        return out

    def as_function(self) -> Tabulated:
        """Positive records as a tabulated attachment function (gaps interpolated)."""
        ok = self.A_hat > 0
        if self.k_hi is None:
            return reference_function(self.k[ok], self.A_hat[ok])
        ks = np.concatenate([np.arange(a, b + 1) for a, b in zip(self.k[ok], self.k_hi[ok])])
        vals = np.repeat(self.A_hat[ok], (self.k_hi[ok] - self.k[ok] + 1))
        return reference_function(ks, vals)

    # -- serialization --------------------------------------------------------

    def _columns(self):
        n = len(self.k)
        nan = np.full(n, np.nan)
        sd = self.sd if self.sd is not None else nan
        p = self.p_hat if self.p_hat is not None else nan
        flags = list(self.flags)
        if self.k_hi is not None:
            flags = [";".join(filter(None, [f"bin={a}-{b}", f]))
                     for a, b, f in zip(self.k, self.k_hi, flags)]
        return sd, p, flags

    def to_csv(self, fh):
        for key, val in sorted(self._echo().items()):
            fh.write(f"# {key}={json.dumps(val, sort_keys=True)}\n")
        sd, p, flags = self._columns()
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "n_k", "tail_k", "A_hat", "sd", "p_hat", "flags"])
        for i in range(len(self.k)):
            w.writerow([int(self.k[i]), int(self.n_k[i]), int(self.tail_k[i]),
                        _fmt(self.A_hat[i]), _fmt(sd[i]), _fmt(p[i]), flags[i]])

    def to_dict(self) -> dict:
        sd, p, flags = self._columns()
        records = [
            {"k": int(self.k[i]), "n_k": int(self.n_k[i]), "tail_k": int(self.tail_k[i]),
             "A_hat": _num(self.A_hat[i]), "sd": _num(sd[i]), "p_hat": _num(p[i]),
             "flags": flags[i]}
            for i in range(len(self.k))
        ]
        d = self._echo()
        d["records"] = records
        return d

    def to_json(self, fh):
        json.dump(self.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")

    def _echo(self) -> dict:
        return {"method": self.method, "reference_degree": self.reference_degree,
                "config": self.config, "diagnostics": self.diagnostics}

    @classmethod
    def from_dict(cls, d: dict) -> "AttachmentEstimate":
        rec = d["records"]
        return cls._from_rows(
            d.get("method", "unknown"),
            [(r["k"], r["n_k"], r["tail_k"], r["A_hat"], r["sd"], r["p_hat"], r["flags"])
             for r in rec],
            d.get("reference_degree"), d.get("config", {}), d.get("diagnostics", {}))

    @classmethod
    def read(cls, source) -> "AttachmentEstimate":
        """Parse an estimate written by :meth:`to_json` or :meth:`to_csv`."""
        text = source if isinstance(source, str) else source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")
        if text.lstrip().startswith("{"):
            return cls.from_dict(json.loads(text))
        echo, rows = {}, []
        header_seen = False
        for lineno, line in enumerate(io.StringIO(text), start=1):
            s = line.rstrip("\n")
            if not s.strip():
                continue
            if s.startswith("#"):
                key, _, val = s[1:].strip().partition("=")
                echo[key] = json.loads(val) if val else None
                continue
            if not header_seen:
                header_seen = True
                if s.split(",")[0].strip() == "k":
                    continue
            parts = next(csv.reader([s]))
            if len(parts) != 7:
                raise ParseError("expected 7 columns", lineno)
            try:
                rows.append((int(parts[0]), int(parts[1]), int(parts[2]), _parse(parts[3]),
                             _parse(parts[4]), _parse(parts[5]), parts[6]))
            except ValueError:
                raise ParseError(f"bad estimate row {s!r}", lineno) from None
        return cls._from_rows(echo.get("method", "unknown"), rows,
                              echo.get("reference_degree"), echo.get("config") or {},
                              echo.get("diagnostics") or {})

    @classmethod
    def _from_rows(cls, method, rows, reference, config, diagnostics):
        k = np.array([r[0] for r in rows], dtype=np.int64)
        sd = np.array([np.nan if r[4] is None else r[4] for r in rows], dtype=np.float64)
        p = np.array([np.nan if r[5] is None else r[5] for r in rows], dtype=np.float64)
        flags, k_hi = [], []
        for r in rows:
            rest = []
            for f in filter(None, r[6].split(";")):
                if f.startswith("bin="):
                    k_hi.append(int(f[4:].split("-")[1]))
                else:
                    rest.append(f)
            flags.append(";".join(rest))
        return cls(method, k, np.array([r[3] for r in rows], dtype=np.float64),
                   np.array([r[1] for r in rows]), np.array([r[2] for r in rows]),
                   sd=None if np.all(np.isnan(sd)) else sd,
                   p_hat=None if np.all(np.isnan(p)) else p,
                   flags=flags, k_hi=np.array(k_hi, dtype=np.int64) if k_hi else None,
                   reference_degree=reference, config=config, diagnostics=diagnostics)


def _copy(est: AttachmentEstimate) -> AttachmentEstimate:
    return AttachmentEstimate(
        est.method, est.k.copy(), est.A_hat.copy(), est.n_k.copy(), est.tail_k.copy(),
        None if est.sd is None else est.sd.copy(),
        None if est.p_hat is None else est.p_hat.copy(), list(est.flags),
        None if est.k_hi is None else est.k_hi.copy(), est.reference_degree,
        dict(est.config), dict(est.diagnostics))


def _fmt(x) -> str:
    return "" if x is None or not np.isfinite(x) else repr(float(x))


def _num(x):
    return None if x is None or not np.isfinite(x) else float(x)


def _parse(s: str):
    return None if s == "" else float(s)


def default_reference(k, A_hat) -> int:
    k = np.asarray(k)
    pos = np.asarray(A_hat) > 0
    if np.any((k == 1) & pos):
        return 1
    if not np.any(pos):
        raise NumericError("no positive estimate to normalize at")
    return int(k[pos].min())


def reference_function(ks, values) -> Tabulated:
    """Tabulated attachment function through ``(ks, values)``.

    Interior gaps are filled by interpolating ``log A`` linearly; degrees below
    the first knot take its value and degrees past the last knot hold the last.
    """
    ks = np.asarray(ks, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64)
    if ks.size == 0:
        raise NumericError("empty reference attachment function")
    grid = np.arange(int(ks[-1]) + 1)
    table = np.exp(np.interp(grid, ks, np.log(values)))
    table[ks] = values
    return Tabulated(table)


def _dense_tails(h: DegreeHistogram) -> tuple[np.ndarray, np.ndarray]:
    """Dense ``n_k`` and ``sum_{j>k} n_j`` for ``k = 0..k_max``."""
    nk = h.dense()
    return nk, np.cumsum(nk[::-1])[::-1] - nk


# --- baseline ------------------------------------------------------------------

def estimate_baseline(h: DegreeHistogram, normalize: bool = False) -> AttachmentEstimate:
    """``A_k = sum_{j>k} n_j / n_k`` for every observed degree with a nonzero tail."""
    if isinstance(h, Snapshot):
        h = h.histogram
    nk, tails = _dense_tails(h)
    keep = (nk > 0) & (tails > 0)
    ks = np.flatnonzero(keep)
    est = AttachmentEstimate("baseline", ks, tails[ks] / nk[ks], nk[ks], tails[ks])
    if normalize and len(est):
        est = est.normalized()
    return est


# --- oneshot -------------------------------------------------------------------

@dataclass(frozen=True)
class OneshotConfig:
    M: int = 100
    S: int = 5
    R: int = 5
    seed: int = 0
    schedule: Optional[Schedule] = None
    threads: Optional[int] = field(default=None, compare=False)

    def __post_init__(self):
        if self.M < 1 or self.S < 1 or self.R < 1:
            raise ValueError("M, S and R must be positive")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")


def estimate_existence_round(reference: AttachmentFunction, T: int, schedule: Schedule,
                             M: int, seed: int, degrees, key: tuple = (),
                             threads: Optional[int] = None) -> np.ndarray:
    """Fraction of ``M`` simulated networks in which each degree is present.

    Simulation ``i`` is seeded from ``(seed, *key, i)``.
    """
    degrees = np.asarray(degrees, dtype=np.int64)
    if isinstance(reference, AttachmentFunction) and not isinstance(reference, Tabulated):
        reference = Tabulated(reference.values(max(T, 2) + 1))

    def one(i):
        nk = simulate_counts(T, schedule, reference, seed_sequence(seed, *key, i))
        present = np.zeros(len(degrees), dtype=np.int64)
        inside = degrees < len(nk)
        present[inside] = nk[degrees[inside]] > 0
        return present

    hits = run_parallel(one, M, threads)
    return np.sum(hits, axis=0) / M


def _simulation_setup(snap: Snapshot, cfg: OneshotConfig):
    if isinstance(snap, DegreeHistogram):
        snap = Snapshot.from_histogram(snap)
    h = snap.histogram
    if len(h) < 2:
        raise DataError("snapshot needs at least 2 distinct degrees")
    T_sim = snap.N + snap.E - 1
    p = hat_p(snap.N, snap.E)
    schedule = cfg.schedule if cfg.schedule is not None else Constant(p)
    if isinstance(schedule, Sequence) and len(schedule.events) < T_sim - 1:
        raise DataError("replay sequence shorter than the snapshot's T - 1")
    echo = {"M": cfg.M, "S": cfg.S, "R": cfg.R, "seed": cfg.seed, "hat_p": p,
            "T_sim": T_sim, "N": snap.N, "E": snap.E,
            "schedule": "constant" if isinstance(schedule, Constant) else "sequence"}
    return h, T_sim, schedule, echo


def _existence_rounds(observed, first_ref, update, T_sim, schedule, cfg):
    """Run ``R`` repetitions of ``S`` rounds; returns per-repetition mean ``p_hat``."""
    p_rep = np.zeros((cfg.R, len(observed)))
    for r in range(cfg.R):
        ref = first_ref
        total = np.zeros(len(observed))
        for s in range(cfg.S):
            p_s = estimate_existence_round(ref, T_sim, schedule, cfg.M, cfg.seed, observed,
                                           key=(r, s), threads=cfg.threads)
            total += p_s
            ref = update(np.maximum(p_s, 1.0 / (cfg.M + 1)))
        p_rep[r] = total / cfg.S
    return p_rep


def _floor_final(p_rep, cfg):
    p_final = p_rep.mean(axis=0)
    floored = p_final == 0
    p_final = np.where(floored, 1.0 / (cfg.R * cfg.S * cfg.M + 1), p_final)
    return p_final, floored


def _log_sd(values_per_rep, n, tail):
    """Standard deviation of ``log A_hat``.

    Combines the spread over repetitions (Monte Carlo error in ``p_hat``) with
    the Poisson sampling error of the observed counts, ``1/n_k + 1/tail_k``.
    """
    logs = np.log(values_per_rep)
    if logs.shape[0] >= 2:
        spread = np.var(logs, axis=0, ddof=1)
        spread[np.all(logs == logs[0], axis=0)] = 0.0
    else:
        spread = np.zeros(logs.shape[1])
    return np.sqrt(spread + 1.0 / np.asarray(n) + 1.0 / np.asarray(tail))


def oneshot_from_existence(h: DegreeHistogram, p_final) -> AttachmentEstimate:
    """Corrected estimate ``tail_k / (n_k * p_k)`` given existence probabilities.

    ``p_final`` is aligned with the degrees kept by :func:`estimate_baseline`.
    """
    nk, tails = _dense_tails(h)
    ks = np.flatnonzero((nk > 0) & (tails > 0))
    p_final = np.asarray(p_final, dtype=np.float64)
    return AttachmentEstimate("oneshot", ks, tails[ks] / (nk[ks] * p_final),
                              nk[ks], tails[ks], p_hat=p_final)


def estimate_oneshot(snap: Snapshot, cfg: OneshotConfig) -> AttachmentEstimate:
    """Existence-corrected tail-ratio estimate from one snapshot.

    Starting from the baseline, each round simulates ``cfg.M`` SG networks of
    the snapshot's size under the current estimate, measures how often every
    observed degree appears, and re-estimates.  The ``S`` round probabilities
    are averaged, the whole loop is repeated ``R`` times, and the final estimate
    uses the grand mean.
    """
    h, T_sim, schedule, echo = _simulation_setup(snap, cfg)
    nk, tails = _dense_tails(h)
    observed = np.flatnonzero(nk > 0)
    inc = tails[observed] > 0
    ks = observed[inc]
    n_inc, t_inc = nk[ks], tails[ks]

    def update(p_obs):
        return reference_function(ks, t_inc / (n_inc * p_obs[inc]))

    first = reference_function(ks, t_inc / n_inc)
    p_rep = _existence_rounds(observed, first, update, T_sim, schedule, cfg)
    p_final, floored = _floor_final(p_rep, cfg)
    est = oneshot_from_existence(h, p_final[inc])
    est.config = echo
    est.flags = ["floored" if f else "" for f in floored[inc]]
    per_rep = t_inc / (n_inc * np.maximum(p_rep[:, inc], 1.0 / (cfg.S * cfg.M + 1)))
    est.sd = _log_sd(per_rep, n_inc, t_inc)
    return est


# --- binned oneshot ------------------------------------------------------------

@dataclass(frozen=True)
class BinningScheme:
    """Contiguous, disjoint, sorted degree bins ``[lo_g, hi_g]`` starting at 0."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=np.int64)
        hi = np.asarray(self.hi, dtype=np.int64)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if lo.size == 0 or lo.shape != hi.shape:
            raise ValueError("bins must be nonempty and aligned")
        if lo[0] != 0 or np.any(hi < lo) or np.any(lo[1:] != hi[:-1] + 1):
            raise ValueError("bins must be contiguous, disjoint and start at degree 0")

    def __len__(self):
        return len(self.lo)

    @property
    def k_max(self) -> int:
        return int(self.hi[-1])

    def bin_of(self, k):
        return np.searchsorted(self.hi, k)

    @classmethod
    def unit(cls, k_max: int) -> "BinningScheme":
        k = np.arange(k_max + 1)
        return cls(k, k)

    @classmethod
    def geometric(cls, k_max: int, ratio: float = 2.0, first_width: int = 1) -> "BinningScheme":
        """Degree 0 alone, then bins whose widths grow by ``ratio``."""
        if ratio < 1:
            raise ValueError("ratio must be at least 1")
        lo, hi = [0], [0]
        width = float(first_width)
        while hi[-1] < k_max:
            a = hi[-1] + 1
            b = min(a + max(int(round(width)), 1) - 1, k_max)
            lo.append(a)
            hi.append(b)
            width *= ratio
        return cls(np.array(lo), np.array(hi))


def _binned_theta(bins, nk, tails, observed, p_obs, numerator="observed"):
    """Per-bin ``sum tail_k / sum_{n_k>0} n_k p_k`` restricted to usable bins.

    With ``numerator="observed"`` the tail sum runs over observed degrees
    only, matching the denominator; ``"all"`` sums tails over the whole bin.
    """
    size = bins.k_max + 1
    n = np.zeros(size, dtype=np.int64)
    t = np.zeros(size, dtype=np.int64)
    n[:len(nk)] = nk[:size]
    if numerator == "observed":
        t[observed] = tails[observed]
    else:
        t[:len(tails)] = tails[:size]
    weight = np.zeros(size)
    weight[observed] = n[observed] * p_obs
    num = np.add.reduceat(t, bins.lo)
    den = np.add.reduceat(weight, bins.lo)
    has_obs = np.add.reduceat(n, bins.lo) > 0
    keep = has_obs & (num > 0)
    theta = np.zeros(len(bins))
    theta[keep] = num[keep] / den[keep]
    return theta, keep, num, np.add.reduceat(n, bins.lo)


def _expand_bins(bins, theta, keep) -> Tabulated:
    idx = np.flatnonzero(keep)
    widths = bins.hi[idx] - bins.lo[idx] + 1
    ks = np.concatenate([np.arange(bins.lo[g], bins.hi[g] + 1) for g in idx])
    return reference_function(ks, np.repeat(theta[idx], widths))


def estimate_oneshot_binned(snap: Snapshot, cfg: OneshotConfig, bins: BinningScheme,
                            numerator: str = "observed") -> AttachmentEstimate:
    """Binned variant: one value per bin, simulations use the binned function.

    ``theta_g = sum tail_k / sum n_k p_k`` over the observed degrees of bin g.
    Each observed ``n_k p_k`` estimates ``E n_k``, so the numerator is kept to
    the same degrees by default.  ``numerator="all"`` adds the tails of
    unobserved degrees inside the bin; wide bins in the sparse tail are then
    inflated by roughly the inverse of their mean existence probability.
    """
    if numerator not in ("observed", "all"):
        raise ValueError("numerator must be 'observed' or 'all'")
    h, T_sim, schedule, echo = _simulation_setup(snap, cfg)
    nk, tails = _dense_tails(h)
    if bins.k_max < len(nk) - 1:
        raise DataError("bins do not cover the observed degree range")
    observed = np.flatnonzero(nk > 0)

    def update(p_obs):
        theta, keep, _, _ = _binned_theta(bins, nk, tails, observed, p_obs, numerator)
        return _expand_bins(bins, theta, keep)

    first = update(np.ones(len(observed)))
    p_rep = _existence_rounds(observed, first, update, T_sim, schedule, cfg)
    p_final, floored = _floor_final(p_rep, cfg)
    theta, keep, num, nsum = _binned_theta(bins, nk, tails, observed, p_final, numerator)
    g = np.flatnonzero(keep)

    # mean existence probability per bin, weighted by n_k
    full_p = np.zeros(bins.k_max + 1)
    full_p[observed] = p_final
    full_n = np.zeros(bins.k_max + 1)
    full_n[:len(nk)] = nk
    p_bin = np.add.reduceat(full_n * full_p, bins.lo) / np.maximum(nsum, 1)
    # a bin holding one observed degree reports that degree's value unchanged
    single = np.add.reduceat((full_n > 0).astype(np.int64), bins.lo) == 1
    p_bin[single] = np.add.reduceat(full_p, bins.lo)[single]
    full_f = np.zeros(bins.k_max + 1, dtype=bool)
    full_f[observed] = floored
    f_bin = np.add.reduceat(full_f.astype(np.int64), bins.lo) > 0

    floor = 1.0 / (cfg.S * cfg.M + 1)
    per_rep = np.array([
        _binned_theta(bins, nk, tails, observed, np.maximum(p_rep[r], floor),
                      numerator)[0][g]
        for r in range(cfg.R)])
    spread = _log_sd(per_rep, nsum[g], num[g])

    est = AttachmentEstimate("oneshot-binned", bins.lo[g], theta[g], nsum[g], num[g],
                             sd=spread, p_hat=p_bin[g],
                             flags=["floored" if f else "" for f in f_bin[g]],
                             k_hi=bins.hi[g], config=echo)
    est.config["bins"] = len(bins)
    est.config["numerator"] = numerator
    return est


# --- full-timeline maximum likelihood -------------------------------------------

@njit(cache=True)
def _trace_changes(kinds, dst, step, n_initial, n_nodes, node_at_onset):
    n_ev = kinds.shape[0]
    n_edge = 0
    for e in range(n_ev):
        if kinds[e] == 1:
            n_edge += 1
    n_node = n_ev - n_edge
    ch_t = np.empty(1 + n_node + 2 * n_edge, dtype=np.int64)
    ch_k = np.empty_like(ch_t)
    ch_d = np.empty_like(ch_t)
    e_t = np.empty(n_edge, dtype=np.int64)
    e_k = np.empty(n_edge, dtype=np.int64)
    deg = np.zeros(max(n_nodes, 1), dtype=np.int64)
    last = np.full(max(n_nodes, 1), -1, dtype=np.int64)
    onset = np.zeros(max(n_nodes, 1), dtype=np.int64)
    ch_t[0] = 0
    ch_k[0] = 0
    ch_d[0] = n_initial
    c = 1
    m = 0
    for e in range(n_ev):
        t = step[e]
        if kinds[e] == 0:
            ch_t[c] = t if node_at_onset else t + 1
            ch_k[c] = 0
            ch_d[c] = 1
            c += 1
        else:
            v = dst[e]
            if last[v] != t:
                last[v] = t
                onset[v] = deg[v]
            e_t[m] = t
            e_k[m] = onset[v]
            m += 1
            ch_t[c] = t + 1
            ch_k[c] = deg[v]
            ch_d[c] = -1
            ch_t[c + 1] = t + 1
            ch_k[c + 1] = deg[v] + 1
            ch_d[c + 1] = 1
            c += 2
            deg[v] += 1
    return ch_t, ch_k, ch_d, e_t, e_k


@dataclass
class GrowthSeries:
    """Sparse encoding of ``n_k(t)``, ``m_k(t)`` and ``m(t)`` for a trace.

    ``n_k(t)`` is the sum of ``ch_d`` over changes with ``ch_k == k`` and
    ``ch_t <= t``.  ``edge_t``/``edge_k`` list the step and onset degree of every
    new edge.
    """

    n_steps: int
    K: int
    ch_t: np.ndarray
    ch_k: np.ndarray
    ch_d: np.ndarray
    edge_t: np.ndarray
    edge_k: np.ndarray
    m_t: np.ndarray
    m_k: np.ndarray

    def normalizers(self, A) -> np.ndarray:
        """``H(t) = sum_j n_j(t) A_j`` for every step."""
        dH = np.bincount(self.ch_t, weights=self.ch_d * A[self.ch_k],
                         minlength=self.n_steps + 1)
        return np.cumsum(dH)[:self.n_steps]

    def dense_counts(self) -> np.ndarray:
        """``n_k(t)`` as a ``(n_steps, K)`` array; small traces only."""
        out = np.zeros((self.n_steps + 1, self.K), dtype=np.int64)
        np.add.at(out, (self.ch_t, self.ch_k), self.ch_d)
        return np.cumsum(out, axis=0)[:self.n_steps]


def growth_series(tr: GrowthTrace, collapse_ties: bool = False) -> GrowthSeries:
    """Derive the per-step series of a trace.

    With ``collapse_ties`` events sharing a timestamp form a single step: nodes
    appearing at that timestamp exist when its edges arrive, and every edge
    sees the degrees at the onset of the step.
    """
    if collapse_ties:
        if tr.times is None:
            raise DataError("trace has no timestamps to collapse")
        _, step = np.unique(tr.times, return_inverse=True)
        step = step.astype(np.int64)
        n_steps = int(step.max()) + 1 if len(step) else 0
    else:
        step = np.arange(len(tr), dtype=np.int64)
        n_steps = len(tr)
    ch_t, ch_k, ch_d, e_t, e_k = _trace_changes(tr.kinds, tr.dst, step, tr.n_initial,
                                                tr.n_nodes, collapse_ties)
    K = int(ch_k.max()) + 1 if len(ch_k) else 1
    m_t = np.bincount(e_t, minlength=n_steps).astype(np.int64)
    m_k = np.bincount(e_k, minlength=K).astype(np.int64)
    return GrowthSeries(n_steps, K, ch_t, ch_k, ch_d, e_t, e_k, m_t, m_k)


def _loglik(series: GrowthSeries, A) -> float:
    used = series.m_k > 0
    first = float(np.dot(series.m_k[used], np.log(A[used])))
    steps = series.m_t > 0
    if not np.any(steps):
        return first
    H = series.normalizers(A)
    return first - float(np.dot(series.m_t[steps], np.log(H[steps])))


def _as_table(series, A):
    if isinstance(A, AttachmentFunction):
        return A.values(series.K)
    A = np.asarray(A, dtype=np.float64)
    if A.size < series.K:
        raise DataError(f"need attachment values for degrees 0..{series.K - 1}")
    return A[:series.K]


def log_likelihood(tr, A) -> float:
    """``sum_t sum_k m_k(t) log A_k - sum_t m(t) log sum_j n_j(t) A_j``.

    ``tr`` is a :class:`GrowthTrace` or a precomputed :class:`GrowthSeries`.
    """
    series = tr if isinstance(tr, GrowthSeries) else growth_series(tr)
    A = _as_table(series, A)
    if not np.all(np.isfinite(A)) or np.any(A <= 0):
        raise DataError("attachment values must be finite and positive")
    return _loglik(series, A)


def _mle_denominators(series: GrowthSeries, A) -> np.ndarray:
    H = series.normalizers(A)
    w = np.zeros(series.n_steps + 1)
    steps = series.m_t > 0
    w[:series.n_steps][steps] = series.m_t[steps] / H[steps]
    suffix = np.cumsum(w[::-1])[::-1]
    return np.bincount(series.ch_k, weights=series.ch_d * suffix[series.ch_t],
                       minlength=series.K)


@njit(cache=True)
def _exposure(ch_t, ch_k, ch_d, order, m_cum, K, n_steps):
    """Per degree, total ``m(t)`` over steps where ``n_k(t) > 0``."""
    n = np.zeros(K, dtype=np.int64)
    start = np.zeros(K, dtype=np.int64)
    out = np.zeros(K, dtype=np.int64)
    for idx in order:
        t = min(ch_t[idx], n_steps)
        k = ch_k[idx]
        before = n[k]
        n[k] += ch_d[idx]
        if before == 0 and n[k] > 0:
            start[k] = t
        elif before > 0 and n[k] == 0:
            out[k] += m_cum[t] - m_cum[start[k]]
    for k in range(K):
        if n[k] > 0:
            out[k] += m_cum[n_steps] - m_cum[start[k]]
    return out


@njit(cache=True)
def _presence(ch_t, ch_k, ch_d, order, flagged, n_steps):
    """Steps at which some flagged degree has at least one node."""
    n = np.zeros(flagged.shape[0], dtype=np.int64)
    present = np.zeros(n_steps, dtype=np.bool_)
    live = 0
    i = 0
    for t in range(n_steps):
        while i < order.shape[0] and ch_t[order[i]] <= t:
            c = order[i]
            k = ch_k[c]
            if flagged[k]:
                before = n[k]
                n[k] += ch_d[c]
                if before == 0 and n[k] > 0:
                    live += 1
                elif before > 0 and n[k] == 0:
                    live -= 1
            i += 1
        present[t] = live > 0
    return present


def _drop_unbounded(series: GrowthSeries):
    """Remove degrees whose likelihood is maximized only as ``A_k -> inf``.

    That happens when every new edge arriving while a degree-k node existed
    went to a degree-k node.  In the limit those steps contribute a constant,
    so they are removed and the check repeated on what remains.
    """
    order = np.argsort(series.ch_t, kind="stable")
    unbounded = np.zeros(series.K, dtype=bool)
    dropped = np.zeros(series.n_steps, dtype=bool)
    while True:
        m_t = np.where(dropped, 0, series.m_t)
        keep = ~dropped[series.edge_t]
        m_k = np.bincount(series.edge_k[keep], minlength=series.K)
        m_cum = np.concatenate([[0], np.cumsum(m_t)])
        exposure = _exposure(series.ch_t, series.ch_k, series.ch_d, order, m_cum,
                             series.K, series.n_steps)
        new = (m_k > 0) & (exposure == m_k) & ~unbounded
        if not new.any() or new.sum() == (m_k > 0).sum():
            break
        unbounded |= new
        dropped |= _presence(series.ch_t, series.ch_k, series.ch_d, order, unbounded,
                             series.n_steps)
    reduced = GrowthSeries(series.n_steps, series.K, series.ch_t, series.ch_k, series.ch_d,
                           series.edge_t[keep], series.edge_k[keep], m_t, m_k)
    return reduced, unbounded


def estimate_mle_full(tr: GrowthTrace, tol: float = 1e-6, max_iter: int = 1000,
                      init=None, collapse_ties: bool = False) -> AttachmentEstimate:
    """Maximum likelihood ``A_k`` by iterating the likelihood equation.

    Each sweep sets ``A_k = sum_t m_k(t) / sum_t m(t) n_k(t) / H(t)`` and rescales
    so the reference degree has ``A = 1``.  This is a minorize-maximize update, so
    the log-likelihood never decreases.  Iteration stops when the largest
    relative change falls below ``tol``.

    Degrees that never received an edge get ``A_hat = 0`` (flag ``no_edges``).
    Degrees whose maximum lies at infinity (see :func:`_drop_unbounded`) get
    ``A_hat = inf`` (flag ``unbounded``) and the likelihood path refers to the
    remaining steps.  ``sd`` approximates the standard deviation of
    ``log A_hat`` as ``1 / sqrt(sum_t m_k(t))``.
    """
    full = tr if isinstance(tr, GrowthSeries) else growth_series(tr, collapse_ties)
    if full.m_k.sum() == 0:
        raise DataError("trace contains no edges")
    series, unbounded = _drop_unbounded(full)
    used = series.m_k > 0
    ks = np.arange(series.K)
    ref = default_reference(ks, used.astype(float))
    A = np.ones(series.K) if init is None else _as_table(series, init).astype(np.float64)
    if np.any(A[used] <= 0):
        raise DataError("initial values must be positive")
    A = np.where(used, A, 0.0)
    history = [_loglik(series, A)]
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        den = _mle_denominators(series, A)
        new = np.zeros(series.K)
        new[used] = series.m_k[used] / den[used]
        new /= new[ref]
        change = np.max(np.abs(new[used] - A[used] / A[ref]) / new[used])
        A = new
        history.append(_loglik(series, A))
        if change < tol:
            converged = True
            break

    n = t = np.zeros(series.K, dtype=np.int64)
    if isinstance(tr, GrowthTrace):
        nk, tails = _dense_tails(tr.snapshot().histogram)
        n = np.zeros(series.K, dtype=np.int64)
        t = np.zeros(series.K, dtype=np.int64)
        n[:min(len(nk), series.K)] = nk[:series.K]
        t[:min(len(tails), series.K)] = tails[:series.K]
    sd = np.full(series.K, np.nan)
    sd[used] = 1.0 / np.sqrt(series.m_k[used])
    A[unbounded] = np.inf
    flags = ["unbounded" if u else ("" if e else "no_edges")
             for u, e in zip(unbounded, used)]
    return AttachmentEstimate(
        "mle", ks, A, n, t, sd=sd, flags=flags, reference_degree=int(ref),
        config={"tol": tol, "max_iter": max_iter, "collapse_ties": collapse_ties},
        diagnostics={"iterations": it, "converged": converged,
                     "unbounded_degrees": [int(k) for k in np.flatnonzero(unbounded)],
                     "log_likelihood": history[-1], "log_likelihood_path": history})


# --- node-arrival rate -----------------------------------------------------------

def estimate_pt_window(seq: EventSequence, w: int) -> np.ndarray:
    """Fraction of NODE tokens among steps ``max(1, t-w) .. min(T-1, t+w)``."""
    if w < 1:
        raise ValueError("window half-width must be at least 1")
    x = np.asarray(seq.is_node, dtype=np.int64)
    n = len(x)
    if n == 0:
        return np.zeros(0)
    c = np.concatenate([[0], np.cumsum(x)])
    t = np.arange(n)
    lo = np.maximum(t - w, 0)
    hi = np.minimum(t + w, n - 1)
    return (c[hi + 1] - c[lo]) / (hi - lo + 1)


# --- diagnostics shared by the CLI -----------------------------------------------

def tail_ratio(counts) -> np.ndarray:
    """``mean(sum_{j>k} n_j) / mean(n_k)`` across replicate degree counts.

    ``counts`` is a sequence of dense ``n_k`` arrays.  Degrees with zero mean
    count give NaN.
    """
    width = max(len(c) for c in counts)
    mat = np.zeros((len(counts), width))
    for i, c in enumerate(counts):
        mat[i, :len(c)] = c
    mean_n = mat.mean(axis=0)
    mean_tail = np.cumsum(mean_n[::-1])[::-1] - mean_n
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(mean_n > 0, mean_tail / mean_n, np.nan)
