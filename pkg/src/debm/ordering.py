"""Event orderings, probabilistic Kendall's Tau, central ordering and event centers.

The central object is a permutation of biomarker indices ("ordering",
earliest event first).  Subject-level orderings are obtained by ranking
posterior probabilities of abnormality; the cohort-level ordering is the
one minimizing the summed probabilistic Kendall's Tau distance to all
subject orderings.  Adjacent-swap costs of the central ordering, anchored
by two pseudo-events at the ends of the timeline, yield event centers in
(0, 1).
"""

from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .errors import DataError, DegenerateTimelineError

# Sentinel element ids for the timeline-anchoring pseudo-events.  The start
# pseudo-event is abnormal for every subject (posterior 1), the end one for
# none (posterior 0).
START_PSEUDO = -1
END_PSEUDO = -2

_GAMMA_NEG_TOL = 1e-9
_GAMMA_SUM_TOL = 1e-12


@dataclass(frozen=True)
class Timeline:
    """Central event ordering plus event centers on the [0, 1] disease axis.

    `ordering[k]` is the biomarker index of the (k+1)-th event;
    `centers[k]` is its event center.  Centers are non-decreasing and lie
    strictly inside (0, 1); the implicit center of "no event yet" is 0.
    """

    ordering: np.ndarray
    centers: np.ndarray

    def __post_init__(self):
        ordering = np.asarray(self.ordering, dtype=int)
        centers = np.asarray(self.centers, dtype=float)
        object.__setattr__(self, "ordering", ordering)
        object.__setattr__(self, "centers", centers)
        n = ordering.size
        if sorted(ordering.tolist()) != list(range(n)):
            raise DataError("ordering is not a permutation of 0..N-1")
        if centers.shape != (n,):
            raise DataError("centers must align with ordering")
        if np.any(np.diff(centers) < 0):
            raise DegenerateTimelineError("event centers must be non-decreasing")
        if n and not (0.0 < centers[0] and centers[-1] < 1.0):
            raise DegenerateTimelineError("event centers must lie strictly inside (0, 1)")

    @property
    def n_events(self):
        return self.ordering.size

    def centers_by_biomarker(self):
        """Event center of each biomarker, indexed by biomarker id."""
        out = np.empty(self.n_events)
        out[self.ordering] = self.centers
        return out


def prior_rank_from_theta(theta_pre):
    """Rank of each biomarker in the ascending-theta_pre ordering (0 = earliest)."""
    theta_pre = np.asarray(theta_pre, dtype=float)
    order = np.argsort(theta_pre, kind="stable")
    rank = np.empty(theta_pre.size, dtype=int)
    rank[order] = np.arange(theta_pre.size)
    return rank


def subject_ordering(posteriors, prior_rank=None):
    """Rank a subject's events by descending posterior probability of abnormality.

    Missing (NaN) posteriors are omitted from the returned index sequence.
    Ties are broken by the cohort-level prior rank (ascending theta_pre)
    and then by column index, so the result is deterministic.
    """
    p = np.asarray(posteriors, dtype=float)
    observed = np.flatnonzero(~np.isnan(p))
    if observed.size == 0:
        raise DataError("subject has no observed posteriors")
    if prior_rank is None:
        prior_rank = np.arange(p.size)
    else:
        prior_rank = np.asarray(prior_rank)
    # lexsort: last key is primary
    keys = (observed, prior_rank[observed], -p[observed])
    return observed[np.lexsort(keys)]


def kendall_tau(a, b):
    """Classic Kendall's Tau distance: number of discordant pairs.

    Equals the minimal number of adjacent transpositions turning one
    ordering into the other.  Both orderings must be over the same
    element set.
    """
    a = list(a)
    b = list(b)
    if len(a) != len(b) or set(a) != set(b):
        raise DataError("orderings must cover the same element set")
    if len(set(a)) != len(a):
        raise DataError("orderings must not repeat elements")
    pos_b = {e: i for i, e in enumerate(b)}
    seq = np.array([pos_b[e] for e in a])
    # O(N^2) discordant-pair count; N stays small in this problem domain
    return int(np.sum(np.triu(seq[:, None] > seq[None, :], 1)))


def prob_kendall_tau(central, subject, posteriors):
    """Probabilistic Kendall's Tau distance from a subject ordering to a central one.

    `subject` must be sorted by descending posterior (ties allowed), as
    produced by `subject_ordering`.  `posteriors` maps element ids to
    posterior probabilities (dict, or array indexed by element id).

    Walks the central ordering left to right; whenever the next central
    event sits at a later position k of the (working copy of the) subject
    ordering, adds sum_{l=i+1..k} (p_i - p_l) over current working-copy
    positions and moves the event up to position i.  Every summand is
    non-negative because the unprocessed suffix stays sorted descending.
    """
    central = list(central)
    work = list(subject)
    if len(central) != len(work) or set(central) != set(work):
        raise DataError("orderings must cover the same element set")

    def p(e):
        return float(posteriors[e])

    for x, y in zip(work, work[1:]):
        if p(x) < p(y):
            raise DataError("subject ordering is not sorted by descending posterior")

    total = 0.0
    for i in range(len(central) - 1):
        k = work.index(central[i])
        if k > i:
            pi = p(work[i])
            total += sum(pi - p(work[l]) for l in range(i + 1, k + 1))
            work.insert(i, work.pop(k))
    return total


def _batch_prob_kendall_tau(central_local, rank, p_sorted):
    """Vectorized probabilistic Kendall's Tau of many subjects against one ordering.

    All subjects must share the element set 0..n-1 (local ids).
    `rank[j, e]` is the position of element e in subject j's ordering;
    `p_sorted[j, i]` is the posterior at position i (descending).
    Returns the distance per subject.
    """
    m, n = p_sorted.shape
    total = np.zeros(m)
    remaining = np.ones((m, n), dtype=bool)
    rows = np.arange(m)
    cols = np.arange(n)
    for i in range(n - 1):
        pos_e = rank[:, central_local[i]]
        first = remaining.argmax(axis=1)
        jumped = remaining & (cols[None, :] < pos_e[:, None])
        cnt = jumped.sum(axis=1)
        v = (
            (cnt + 1) * p_sorted[rows, first]
            - np.sum(p_sorted, axis=1, where=jumped)
            - p_sorted[rows, pos_e]
        )
        total += np.where(cnt > 0, v, 0.0)
        remaining[rows, pos_e] = False
    return total


class _CohortDistance:
    """Summed probabilistic Kendall's Tau over a cohort, batched by missingness pattern.

    Subjects sharing an observed-biomarker pattern are evaluated together;
    the central ordering is restricted to each pattern, so a subject only
    contributes over events it observed.  With `extended=True` the two
    pseudo-events are appended (posterior 1 first, posterior 0 last).
    """

    def __init__(self, orderings, posteriors, extended=False):
        posteriors = np.asarray(posteriors, dtype=float)
        self.n_elements = posteriors.shape[1]
        self.extended = extended
        groups = {}
        for j, order in enumerate(orderings):
            order = np.asarray(order, dtype=int)
            if order.size == 0:
                continue
            key = tuple(sorted(order.tolist()))
            groups.setdefault(key, []).append((j, order))
        self._groups = []
        for key in sorted(groups):
            members = groups[key]
            local = {e: i for i, e in enumerate(key)}
            n = len(key)
            m = len(members)
            if extended:
                rank = np.empty((m, n + 2), dtype=int)
                p_sorted = np.empty((m, n + 2))
                p_sorted[:, 0] = 1.0
                p_sorted[:, -1] = 0.0
                for r, (j, order) in enumerate(members):
                    rank[r, 0] = 0
                    rank[r, -1] = n + 1
                    for pos, e in enumerate(order):
                        rank[r, local[e] + 1] = pos + 1
                        p_sorted[r, pos + 1] = posteriors[j, e]
            else:
                rank = np.empty((m, n), dtype=int)
                p_sorted = np.empty((m, n))
                for r, (j, order) in enumerate(members):
                    for pos, e in enumerate(order):
                        rank[r, local[e]] = pos
                        p_sorted[r, pos] = posteriors[j, e]
            if np.any(np.diff(p_sorted, axis=1) > 0):
                raise DataError("subject orderings must be sorted by descending posterior")
            self._groups.append((set(key), local, rank, p_sorted))

    def total(self, central):
        """Sum of distances of all subjects to `central` (sequence of element ids).

        With `extended=True`, `central` must already carry the pseudo-event
        sentinels (START_PSEUDO first to be optimal, END_PSEUDO likewise).
        """
        out = 0.0
        for observed, local, rank, p_sorted in self._groups:
            if self.extended:
                restricted = [0 if e == START_PSEUDO else len(local) + 1 if e == END_PSEUDO
                              else local[e] + 1
                              for e in central if e in observed or e in (START_PSEUDO, END_PSEUDO)]
            else:
                restricted = [local[e] for e in central if e in observed]
            if len(restricted) < 2:
                continue
            out += float(np.sum(_batch_prob_kendall_tau(restricted, rank, p_sorted)))
        return out


def _local_search(start, objective):
    """Deterministic first-improvement search over adjacent swaps and insertions."""
    current = list(start)
    best = objective(current)
    improved = True
    while improved:
        improved = False
        n = len(current)
        for i in range(n - 1):
            cand = current.copy()
            cand[i], cand[i + 1] = cand[i + 1], cand[i]
            val = objective(cand)
            if val < best:
                current, best, improved = cand, val, True
        for src in range(n):
            for dst in range(n):
                if dst == src:
                    continue
                cand = current.copy()
                cand.insert(dst, cand.pop(src))
                val = objective(cand)
                if val < best:
                    current, best, improved = cand, val, True
    return current, best


def central_ordering(orderings, posteriors, theta_pre, restarts=0, rng=None):
    """Estimate the cohort-level event ordering.

    Starts from the ascending-theta_pre ordering and runs a deterministic
    local search (adjacent transpositions, then single-element insertions,
    repeated until a full sweep brings no strict improvement) on the summed
    probabilistic Kendall's Tau objective.  Optional random restarts
    (seeded, off by default) keep the best result by objective value.
    """
    theta_pre = np.asarray(theta_pre, dtype=float)
    if len(orderings) == 0:
        raise DataError("need at least one subject ordering")
    dist = _CohortDistance(orderings, posteriors)
    init = np.argsort(theta_pre, kind="stable").tolist()
    best, best_val = _local_search(init, dist.total)
    for _ in range(int(restarts)):
        if rng is None:
            rng = np.random.default_rng(0)
        alt, alt_val = _local_search(rng.permutation(theta_pre.size).tolist(), dist.total)
        if alt_val < best_val:
            best, best_val = alt, alt_val
    return np.asarray(best, dtype=int)


def central_ordering_objective(central, orderings, posteriors):
    """Summed probabilistic Kendall's Tau of a candidate central ordering."""
    return _CohortDistance(orderings, posteriors).total(list(central))


def exhaustive_central_ordering(orderings, posteriors):
    """Brute-force minimizer over all N! orderings (oracle for small N)."""
    dist = _CohortDistance(orderings, posteriors)
    n = np.asarray(posteriors).shape[1]
    best, best_val = None, np.inf
    for perm in permutations(range(n)):
        val = dist.total(list(perm))
        if val < best_val:
            best, best_val = perm, val
    return np.asarray(best, dtype=int), best_val


def _centers_from_swap_costs(gamma):
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma < -_GAMMA_NEG_TOL):
        raise DegenerateTimelineError(
            "negative adjacent-swap cost: ordering is not locally optimal"
        )
    gamma = np.maximum(gamma, 0.0)
    total = gamma.sum()
    if abs(total) < _GAMMA_SUM_TOL:
        raise DegenerateTimelineError("all adjacent-swap costs vanish; timeline undefined")
    scaled = gamma / total
    return np.cumsum(scaled)[:-1]


def adjacent_swap_costs(central, orderings, posteriors):
    """Cost of each adjacent swap of the pseudo-event-extended central ordering.

    Entry i is the increase in summed probabilistic Kendall's Tau when the
    events at extended positions i and i+1 trade places (i = 0 swaps the
    start pseudo-event with the first real event).  Non-negative when the
    ordering is locally optimal.
    """
    central = list(np.asarray(central, dtype=int))
    dist = _CohortDistance(orderings, posteriors, extended=True)
    extended = [START_PSEUDO] + central + [END_PSEUDO]
    base = dist.total(extended)
    gamma = np.empty(len(central) + 1)
    for i in range(len(extended) - 1):
        swapped = extended.copy()
        swapped[i], swapped[i + 1] = swapped[i + 1], swapped[i]
        gamma[i] = dist.total(swapped) - base
    return gamma


def event_centers(central, orderings, posteriors):
    """Locate every event of the central ordering on the [0, 1] disease axis.

    Extends each subject with the two pseudo-events, computes the cost of
    every adjacent swap of the extended central ordering (summed
    probabilistic Kendall's Tau increase over subjects), scales the costs
    to sum to one and cumulates them.  Returns the resulting Timeline.
    """
    central = np.asarray(central, dtype=int)
    gamma = adjacent_swap_costs(central, orderings, posteriors)
    centers = _centers_from_swap_costs(gamma)
    return Timeline(ordering=central, centers=centers)


def febm_event_centers(central, values, fits):
    """Event centers for a maximum-likelihood (generative) event ordering.

    Swap costs are data log-likelihood drops under adjacent swaps of the
    ordering, with the pseudo-events realized as synthetic always-abnormal
    and never-abnormal biomarker columns.  Scaling and cumulation match
    `event_centers`.
    """
    from .febm import _extended_log_densities, _loglik_from_densities

    central = list(np.asarray(central, dtype=int))
    n = len(central)
    log_pe, log_pn = _extended_log_densities(values, fits)
    extended = [0] + [e + 1 for e in central] + [n + 1]
    base = _loglik_from_densities(extended, log_pe, log_pn)
    gamma = np.empty(n + 1)
    for i in range(len(extended) - 1):
        swapped = extended.copy()
        swapped[i], swapped[i + 1] = swapped[i + 1], swapped[i]
        gamma[i] = base - _loglik_from_densities(swapped, log_pe, log_pn)
    centers = _centers_from_swap_costs(gamma)
    return Timeline(ordering=np.asarray(central, dtype=int), centers=centers)
