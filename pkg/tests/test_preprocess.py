import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from countyrisk.errors import EmptyFitSet, InsufficientDonors, MissingParams
from countyrisk.preprocess import (
    PreprocessConfig,
    PreprocessReport,
    ScalingParams,
    apply_scaler,
    drop_missing_outcome,
    drop_sparse_counties,
    fit_scaler,
    handle_outliers,
    iqr_fences,
    knn_impute,
)

from conftest import make_dataset, random_coords


def haversine_oracle(a, b):
    lat1, lon1, lat2, lon2 = map(math.radians, (a[0], a[1], b[0], b[1]))
    h = math.sin((lat2 - lat1) / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    return 2 * 6371.0 * math.asin(math.sqrt(min(1.0, h)))


def knn_oracle(coords, table, fips, columns, k):
    """Brute-force imputation over all pairwise distances."""
    out = table.copy()
    n = len(coords)
    for i in range(n):
        for j in columns:
            if not math.isnan(table[i, j]):
                continue
            cands = [(haversine_oracle(coords[i], coords[m]), fips[m], m)
                     for m in range(n) if m != i and not math.isnan(table[m, j])]
            cands.sort()
            out[i, j] = sum(table[m, j] for _, _, m in cands[:k]) / k
    return out


def random_dataset(rng, n, missing=0.15):
    coords = random_coords(rng, n)
    # repeated centroids exercise the FIPS tie-break
    dup = rng.random(n) < 0.2
    coords[dup] = coords[0]
    table = np.column_stack([rng.uniform(0, 100, n), rng.normal(50, 10, n),
                             rng.lognormal(11, 0.4, n), rng.normal(60, 15, n)])
    table[rng.random(table.shape) < missing] = np.nan
    fips = [f"{v:05d}" for v in rng.permutation(np.arange(1000, 1000 + 3 * n))[:n]]
    return coords, table, fips


# ------------------------------------------------------------------ drop_sparse

def test_drop_sparse_threshold():
    t = np.ones((3, 4))
    t[1, :3] = np.nan  # 3 missing
    t[2, :] = np.nan  # 4 missing
    ds = make_dataset(np.zeros((3, 2)), t)
    report = PreprocessReport()
    out = drop_sparse_counties(ds, PreprocessConfig(max_missing_per_county=3), report)
    assert out.fips == ["00001", "00002"]
    assert report.dropped_fips == ["00003"]
    assert drop_sparse_counties(ds, PreprocessConfig(max_missing_per_county=0)).fips == ["00001"]


def test_drop_sparse_default_six_of_fourteen_missing():
    from countyrisk.synth import make_synthetic

    ds = make_synthetic(n=60, seed=1, missing_rate=0.0, outcome_missing_rate=0.0, sparse_rate=0.0)
    names = ds.names
    m = ds.matrix()
    m[0, :6] = np.nan
    m[1, :5] = np.nan
    ds = ds.with_values(names, m)
    kept = drop_sparse_counties(ds).fips
    assert ds.fips[0] not in kept and ds.fips[1] in kept and len(kept) == 59


def test_drop_sparse_complete_returns_same_object():
    ds = make_dataset(np.zeros((2, 2)), np.ones((2, 4)))
    assert drop_sparse_counties(ds) is ds


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(0, 4))
def test_drop_sparse_order_independent(seed, threshold):
    rng = np.random.default_rng(seed)
    coords, table, fips = random_dataset(rng, 25, missing=0.4)
    ds = make_dataset(coords, table, fips=fips)
    perm = rng.permutation(25)
    cfg = PreprocessConfig(max_missing_per_county=threshold)
    a = set(drop_sparse_counties(ds, cfg).fips)
    b = set(drop_sparse_counties(ds.subset(perm), cfg).fips)
    assert a == b
    assert a == {f for f, row in zip(fips, table) if np.isnan(row).sum() <= threshold}


# ------------------------------------------------------------------ knn_impute

def test_three_county_toy():
    coords = [[35.0, -90.0], [35.5, -90.0], [36.5, -90.0]]
    table = [[np.nan, 1, 1, 1], [20.0, 1, 1, 1], [50.0, 1, 1, 1]]
    out = knn_impute(make_dataset(coords, table), PreprocessConfig(knn_k=2))
    assert out.column("a_pct")[0] == pytest.approx(35.0, abs=0)


def test_nearest_single_donor():
    coords = [[35.0, -90.0], [35.5, -90.0], [36.5, -90.0]]
    table = [[np.nan, 1, 1, 1], [20.0, 1, 1, 1], [50.0, 1, 1, 1]]
    assert knn_impute(make_dataset(coords, table), PreprocessConfig(knn_k=1)).column("a_pct")[0] == 20.0


def test_constant_neighbourhood():
    rng = np.random.default_rng(0)
    coords = random_coords(rng, 30)
    table = np.full((30, 4), 12.5)
    table[7, 1] = np.nan
    out = knn_impute(make_dataset(coords, table), PreprocessConfig(knn_k=20))
    assert out.column("b")[7] == 12.5


def test_no_missing_returns_same_object():
    ds = make_dataset(np.zeros((3, 2)), np.ones((3, 4)))
    assert knn_impute(ds) is ds


def test_outcome_not_imputed_by_default():
    coords = [[35.0, -90.0], [35.5, -90.0], [36.5, -90.0]]
    table = [[1, 1, 1, np.nan], [2, 1, 1, 1], [3, 1, 1, 2]]
    ds = make_dataset(coords, table)
    assert np.isnan(knn_impute(ds, PreprocessConfig(knn_k=2)).column("y")[0])
    assert knn_impute(ds, PreprocessConfig(knn_k=2, impute_outcome=True)).column("y")[0] == 1.5


def test_insufficient_donors_reports_per_variable():
    coords = [[35.0, -90.0], [35.5, -90.0], [36.5, -90.0]]
    table = [[np.nan, np.nan, 1, 1], [2, 1, 1, 1], [np.nan, 1, 1, 1]]
    with pytest.raises(InsufficientDonors) as info:
        knn_impute(make_dataset(coords, table), PreprocessConfig(knn_k=2))
    assert info.value.shortfalls == {"a_pct": 1}


def test_tie_broken_by_fips():
    coords = [[35.0, -90.0], [36.0, -90.0], [36.0, -90.0]]
    table = [[np.nan, 1, 1, 1], [10.0, 1, 1, 1], [30.0, 1, 1, 1]]
    ds = make_dataset(coords, table, fips=["01001", "01009", "01005"])
    assert knn_impute(ds, PreprocessConfig(knn_k=1)).column("a_pct")[0] == 30.0


def test_knn_matches_oracle_random():
    rng = np.random.default_rng(7)
    for _ in range(20):
        n = int(rng.integers(8, 40))
        k = int(rng.integers(1, 5))
        coords, table, fips = random_dataset(rng, n)
        ds = make_dataset(coords, table, fips=fips)
        try:
            got = knn_impute(ds, PreprocessConfig(knn_k=k)).matrix()
        except InsufficientDonors:
            continue
        want = knn_oracle(coords, table, fips, [0, 1, 2], k)
        np.testing.assert_allclose(got, want, rtol=1e-12, equal_nan=True)


def test_knn_bounded_by_donors_and_idempotent():
    rng = np.random.default_rng(8)
    coords, table, fips = random_dataset(rng, 40)
    ds = make_dataset(coords, table, fips=fips)
    cfg = PreprocessConfig(knn_k=3)
    once = knn_impute(ds, cfg)
    assert knn_impute(once, cfg).records == once.records
    x = ds.matrix()
    got = once.matrix()
    obs = ~np.isnan(x)
    np.testing.assert_array_equal(got[obs], x[obs])
    for j in range(3):
        col = x[:, j]
        imputed = np.isnan(col)
        assert np.all(got[imputed, j] >= np.nanmin(col)) and np.all(got[imputed, j] <= np.nanmax(col))


def test_knn_report_counts():
    rng = np.random.default_rng(9)
    coords, table, fips = random_dataset(rng, 30)
    report = PreprocessReport()
    knn_impute(make_dataset(coords, table, fips=fips), PreprocessConfig(knn_k=2), report)
    assert report.imputed_counts == {n: int(np.isnan(table[:, j]).sum()) for j, n in enumerate(["a_pct", "b", "c"])}


# ------------------------------------------------------------------ outliers

def test_fences_hand_values():
    assert iqr_fences(np.array([1, 2, 3, 4, 1000.0]), 3.0) == (-4.0, 10.0)


def test_outlier_clamped_to_upper_fence():
    t = np.ones((5, 4))
    t[:, 1] = [1, 2, 3, 4, 1000]
    report = PreprocessReport()
    out = handle_outliers(make_dataset(np.zeros((5, 2)), t), PreprocessConfig(), report)
    assert out.column("b").tolist() == [1, 2, 3, 4, 10]
    assert report.clamped_counts["b"] == 1


def test_constant_values_untouched():
    ds = make_dataset(np.zeros((4, 2)), np.full((4, 4), 7.0))
    assert handle_outliers(ds) is ds


def test_percent_columns_not_clamped_by_default():
    t = np.ones((5, 4))
    t[:, 0] = [1, 2, 3, 4, 100]
    ds = make_dataset(np.zeros((5, 2)), t)
    assert handle_outliers(ds) is ds


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=3, max_size=40), st.floats(3.0, 10.0))
def test_outliers_idempotent_and_median_preserving(values, m):
    n = len(values)
    t = np.ones((n, 4))
    t[:, 1] = values
    cfg = PreprocessConfig(outlier_iqr_multiplier=m)
    once = handle_outliers(make_dataset(np.zeros((n, 2)), t), cfg)
    twice = handle_outliers(once, cfg)
    np.testing.assert_array_equal(once.column("b"), twice.column("b"))
    med = np.median(values)
    before, after = np.asarray(values) - med, once.column("b") - med
    assert np.all(np.sign(before) * np.sign(after) >= 0)


def test_small_multiplier_is_not_idempotent():
    # below m = 3 a clamped extreme can be one of the order statistics the
    # quartile interpolation reads, so a second pass moves the fence again
    t = np.ones((3, 4))
    t[:, 1] = [0.0, 0.0, 1.0]
    cfg = PreprocessConfig(outlier_iqr_multiplier=0.5)
    once = handle_outliers(make_dataset(np.zeros((3, 2)), t), cfg)
    assert once.column("b")[2] == 0.75
    assert handle_outliers(once, cfg).column("b")[2] == 0.5625


# ------------------------------------------------------------------ scaling

def scaled_ds():
    t = np.ones((4, 4))
    t[:, 1] = [100, 300, 500, 700]
    t[:, 2] = 3.0
    return make_dataset(np.zeros((4, 2)), t)


def test_fit_scaler_on_rows():
    params = fit_scaler(scaled_ds(), [0, 1, 2])
    assert params.bounds == {"b": (100.0, 500.0), "c": (3.0, 3.0)}


def test_fit_scaler_empty():
    with pytest.raises(EmptyFitSet):
        fit_scaler(scaled_ds(), [])


def test_apply_scaler_no_clamp_and_constant():
    out = apply_scaler(scaled_ds(), fit_scaler(scaled_ds(), [0, 1, 2]))
    assert out.column("b").tolist() == [0.0, 0.5, 1.0, 1.5]
    assert out.column("c").tolist() == [0.0] * 4
    assert out.column("a_pct").tolist() == [1.0] * 4


def test_apply_scaler_example_twelve():
    t = np.ones((1, 4))
    t[0, 1] = 12.0
    out = apply_scaler(make_dataset(np.zeros((1, 2)), t), ScalingParams({"b": (0.0, 10.0)}))
    assert out.column("b")[0] == pytest.approx(1.2)


def test_apply_scaler_missing_params():
    with pytest.raises(MissingParams):
        apply_scaler(scaled_ds(), ScalingParams({"b": (0.0, 1.0)}), ["b", "c"])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=30))
def test_fit_subset_maps_to_unit_interval(values):
    n = len(values)
    t = np.ones((n, 4))
    t[:, 1] = values
    ds = make_dataset(np.zeros((n, 2)), t)
    col = apply_scaler(ds, fit_scaler(ds, range(n))).column("b")
    if max(values) > min(values):
        assert col.min() == 0.0 and col.max() == 1.0
    else:
        assert np.all(col == 0.0)


def test_scaling_params_round_trip():
    p = ScalingParams({"b": (1.0, 2.5)})
    assert ScalingParams.from_dict(p.to_dict()) == p


def test_drop_missing_outcome():
    t = np.ones((3, 4))
    t[1, 3] = np.nan
    report = PreprocessReport()
    out = drop_missing_outcome(make_dataset(np.zeros((3, 2)), t), report)
    assert out.fips == ["00001", "00003"] and report.dropped_missing_outcome == ["00002"]


def test_config_validation():
    from countyrisk.errors import InvalidValue

    with pytest.raises(InvalidValue):
        PreprocessConfig(knn_k=0)
    with pytest.raises(InvalidValue):
        PreprocessConfig(outlier_iqr_multiplier=0)
