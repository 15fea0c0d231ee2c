import numpy as np
import pytest

from debm.errors import DataError, DegenerateTimelineError
from debm.ordering import (
    END_PSEUDO,
    START_PSEUDO,
    Timeline,
    _CohortDistance,
    adjacent_swap_costs,
    central_ordering,
    central_ordering_objective,
    event_centers,
    exhaustive_central_ordering,
    kendall_tau,
    prior_rank_from_theta,
    prob_kendall_tau,
    subject_ordering,
)


def brute_discordant_pairs(a, b):
    """Oracle: count pairs ordered differently in the two sequences."""
    pos = {e: i for i, e in enumerate(b)}
    count = 0
    for i in range(len(a)):
        for j in range(i + 1, len(a)):
            if pos[a[i]] > pos[a[j]]:
                count += 1
    return count


def random_subjects(rng, n, m, missing=0.0):
    post = rng.uniform(0, 1, size=(m, n))
    if missing:
        post[rng.uniform(size=post.shape) < missing] = np.nan
        for j in range(m):  # keep every subject observable
            if np.all(np.isnan(post[j])):
                post[j, rng.integers(n)] = rng.uniform()
    orderings = [subject_ordering(post[j]) for j in range(m)]
    return post, orderings


class TestKendallTau:
    def test_identity(self):
        assert kendall_tau([1, 2, 3], [1, 2, 3]) == 0

    def test_reversed_is_max(self):
        assert kendall_tau([1, 2, 3], [3, 2, 1]) == 3

    def test_hand_case(self):
        assert kendall_tau(["A", "B", "C"], ["C", "A", "B"]) == 2
        assert brute_discordant_pairs(["A", "B", "C"], ["C", "A", "B"]) == 2

    def test_matches_brute_force(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            n = rng.integers(2, 9)
            a = rng.permutation(n).tolist()
            b = rng.permutation(n).tolist()
            assert kendall_tau(a, b) == brute_discordant_pairs(a, b)

    def test_symmetry_and_bound(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            n = int(rng.integers(2, 8))
            a = rng.permutation(n).tolist()
            b = rng.permutation(n).tolist()
            assert kendall_tau(a, b) == kendall_tau(b, a)
            assert kendall_tau(a, b) <= n * (n - 1) // 2

    def test_element_mismatch(self):
        with pytest.raises(DataError):
            kendall_tau([1, 2], [1, 3])


class TestProbKendallTau:
    def test_hand_trace_n2(self):
        p = {"A": 0.4, "B": 0.9}
        assert prob_kendall_tau(["A", "B"], ["B", "A"], p) == 0.5

    def test_hand_trace_n3(self):
        p = {"A": 0.5, "B": 0.3, "C": 0.8}
        assert prob_kendall_tau(["A", "B", "C"], ["C", "A", "B"], p) == 0.8

    def test_zero_on_identity(self):
        p = {"A": 0.5, "B": 0.3, "C": 0.8}
        assert prob_kendall_tau(["C", "A", "B"], ["C", "A", "B"], p) == 0.0

    def test_asymmetric(self):
        # both directions valid (each first argument plays the central role)
        p = np.array([0.9, 0.6, 0.2])
        s = subject_ordering(p)  # (0, 1, 2)
        central = [2, 0, 1]
        forward = prob_kendall_tau(central, s.tolist(), p)
        # treat the central ordering as if it were a subject with its own
        # posterior profile to probe the distance the other way round
        p_central = np.array([0.2, 0.15, 0.8])
        s2 = subject_ordering(p_central)
        back = prob_kendall_tau(s.tolist(), s2.tolist(), p_central)
        assert forward != back

    def test_non_negative_random(self):
        rng = np.random.default_rng(3)
        for _ in range(300):
            n = int(rng.integers(2, 8))
            p = rng.uniform(0, 1, n)
            s = subject_ordering(p)
            central = rng.permutation(n).tolist()
            assert prob_kendall_tau(central, s.tolist(), p) >= 0.0

    def test_requires_descending_subject(self):
        p = np.array([0.9, 0.1])
        with pytest.raises(DataError):
            prob_kendall_tau([0, 1], [1, 0], p)

    def test_element_mismatch(self):
        with pytest.raises(DataError):
            prob_kendall_tau([0, 1], [0, 2], {0: 0.5, 1: 0.1, 2: 0.4})

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            n = int(rng.integers(2, 8))
            m = int(rng.integers(1, 6))
            post, orderings = random_subjects(rng, n, m, missing=0.2)
            central = rng.permutation(n).tolist()
            batch = _CohortDistance(orderings, post).total(central)
            scalar = 0.0
            for j in range(m):
                observed = orderings[j]
                restricted = [e for e in central if e in set(observed.tolist())]
                if len(restricted) >= 2:
                    scalar += prob_kendall_tau(restricted, observed.tolist(), post[j])
            assert batch == pytest.approx(scalar, abs=1e-12)


class TestSubjectOrdering:
    def test_sorts_descending(self):
        order = subject_ordering(np.array([0.9, 0.4, 0.7]))
        assert order.tolist() == [0, 2, 1]

    def test_ties_fall_back_to_prior_rank(self):
        prior_rank = prior_rank_from_theta(np.array([0.3, 0.1, 0.2]))
        order = subject_ordering(np.array([0.5, 0.5, 0.5]), prior_rank)
        assert order.tolist() == [1, 2, 0]

    def test_missing_omitted(self):
        order = subject_ordering(np.array([0.9, np.nan, 0.7]))
        assert order.tolist() == [0, 2]

    def test_all_missing_rejected(self):
        with pytest.raises(DataError):
            subject_ordering(np.array([np.nan, np.nan]))

    def test_rank_invariance_under_scaling(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            p = rng.uniform(0.01, 1, 6)
            assert subject_ordering(p).tolist() == subject_ordering(0.5 * p).tolist()


class TestCentralOrdering:
    def test_unanimous_subjects(self):
        p = np.tile([0.9, 0.7, 0.4, 0.2], (8, 1))
        orderings = [subject_ordering(p[j]) for j in range(8)]
        order = central_ordering(orderings, p, theta_pre=1 - p.mean(axis=0))
        assert order.tolist() == [0, 1, 2, 3]
        assert central_ordering_objective(order, orderings, p) == 0.0

    def test_single_subject_reaches_zero(self):
        p = np.array([[0.2, 0.9, 0.6]])
        orderings = [subject_ordering(p[0])]
        order = central_ordering(orderings, p, theta_pre=1 - p[0])
        assert central_ordering_objective(order, orderings, p) == 0.0

    def test_matches_exhaustive_seeded(self):
        rng = np.random.default_rng(42)
        exact = 0
        for _ in range(10):
            post, orderings = random_subjects(rng, 4, 12)
            theta_pre = 1 - post.mean(axis=0)
            order = central_ordering(orderings, post, theta_pre)
            obj = central_ordering_objective(order, orderings, post)
            _, best = exhaustive_central_ordering(orderings, post)
            assert obj <= best * 1.05 + 1e-12
            exact += obj == pytest.approx(best, abs=1e-12)
        assert exact >= 9

    def test_never_worse_than_init(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            post, orderings = random_subjects(rng, 5, 10)
            theta_pre = rng.uniform(0, 1, 5)
            init = np.argsort(theta_pre, kind="stable")
            order = central_ordering(orderings, post, theta_pre)
            assert (central_ordering_objective(order, orderings, post)
                    <= central_ordering_objective(init, orderings, post) + 1e-12)

    def test_empty_cohort_rejected(self):
        with pytest.raises(DataError):
            central_ordering([], np.empty((0, 3)), np.array([0.1, 0.2, 0.3]))


def oracle_event_centers(central, orderings, posteriors):
    """From-scratch re-implementation on explicitly extended orderings."""
    n = np.asarray(posteriors).shape[1]
    start, end = n, n + 1  # fresh ids for the pseudo-events
    ext_central = [start] + list(central) + [end]
    ext_orderings, ext_posteriors = [], []
    for j, order in enumerate(orderings):
        ext_orderings.append([start] + list(order) + [end])
        p = {e: posteriors[j][e] for e in list(order)}
        p[start], p[end] = 1.0, 0.0
        ext_posteriors.append(p)

    def total(seq):
        out = 0.0
        for order, p in zip(ext_orderings, ext_posteriors):
            restricted = [e for e in seq if e in p]
            out += prob_kendall_tau(restricted, order, p)
        return out

    base = total(ext_central)
    gamma = []
    for i in range(len(ext_central) - 1):
        swapped = ext_central.copy()
        swapped[i], swapped[i + 1] = swapped[i + 1], swapped[i]
        gamma.append(total(swapped) - base)
    gamma = np.array(gamma)
    return np.cumsum(gamma / gamma.sum())[:-1]


class TestEventCenters:
    def test_hand_case_single_event(self):
        post = np.array([[0.6]])
        orderings = [np.array([0])]
        timeline = event_centers([0], orderings, post)
        assert timeline.centers[0] == 0.4
        gamma = adjacent_swap_costs([0], orderings, post)
        assert gamma.tolist() == [0.4, 0.6]

    def test_matches_naive_recomputation(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            post, orderings = random_subjects(rng, 3, 20)
            order = central_ordering(orderings, post, 1 - post.mean(axis=0))
            timeline = event_centers(order, orderings, post)
            expected = oracle_event_centers(order, orderings, post)
            assert timeline.centers == pytest.approx(expected, abs=1e-12)

    def test_monotone_and_interior(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            n = int(rng.integers(2, 6))
            post, orderings = random_subjects(rng, n, int(rng.integers(2, 8)))
            order = central_ordering(orderings, post, 1 - np.nanmean(post, axis=0))
            timeline = event_centers(order, orderings, post)
            assert np.all(np.diff(timeline.centers) >= 0)
            assert 0 < timeline.centers[0] and timeline.centers[-1] < 1
            gamma = adjacent_swap_costs(order, orderings, post)
            assert np.all(gamma >= 0)
            scaled = gamma / gamma.sum()
            assert scaled.sum() == pytest.approx(1.0, abs=1e-12)

    def test_non_optimal_ordering_rejected(self):
        # a clearly suboptimal central ordering has a negative swap cost
        p = np.tile([0.9, 0.1], (5, 1))
        orderings = [subject_ordering(p[j]) for j in range(5)]
        with pytest.raises(DegenerateTimelineError):
            event_centers([1, 0], orderings, p)

    def test_missing_subject_contributions(self):
        # a subject missing one biomarker must not contribute to its swaps
        post = np.array([[0.9, 0.5, 0.1], [0.8, np.nan, 0.2]])
        orderings = [subject_ordering(post[0]), subject_ordering(post[1])]
        order = central_ordering(orderings, post, 1 - np.nanmean(post, axis=0))
        timeline = event_centers(order, orderings, post)
        assert np.all(np.diff(timeline.centers) >= 0)


class TestTimeline:
    def test_validates_permutation(self):
        with pytest.raises(DataError):
            Timeline(ordering=np.array([0, 0, 1]), centers=np.array([0.1, 0.2, 0.3]))

    def test_validates_monotonicity(self):
        with pytest.raises(DegenerateTimelineError):
            Timeline(ordering=np.array([0, 1]), centers=np.array([0.5, 0.2]))

    def test_centers_by_biomarker(self):
        tl = Timeline(ordering=np.array([2, 0, 1]), centers=np.array([0.2, 0.5, 0.8]))
        assert tl.centers_by_biomarker().tolist() == [0.5, 0.8, 0.2]
