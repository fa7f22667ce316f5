"""Acceptance suite: one test per release criterion, each printing a PASS line.

The image-based criteria run on real MNIST IDX files when DIAE_MNIST_DIR is
set (see conftest.image_pools); otherwise they use the deterministic
synthetic digit corpus at the same sizes, widths and thresholds.  Run with

    pytest tests/test_acceptance.py -v -s
"""

import numpy as np
import pytest

from diae import (
    LabeledFeatures,
    TrainConfig,
    accuracy,
    encode,
    encode_stack,
    fisher_ratio,
    knn_predict,
    load_delimited,
    load_idx,
    load_model,
    one_hot,
    save_model,
    train_layer,
    train_stack,
    write_idx_images,
    write_idx_labels,
)
from diae.cli import main, read_report
from diae.data import subset
from diae.layer import (
    LayerWeights,
    solve_class_map,
    solve_code,
    solve_decoder,
    solve_encoder,
)

pytestmark = pytest.mark.acceptance


def report(criterion, detail):
    print(f"ACCEPTANCE {criterion}: PASS  ({detail})")


# ---------------------------------------------------------------------------
# Criterion 1: block exactness on random instances


def gd_minimize(objective_grad_hessp, shape, iters=200_000, gtol=1e-13, scale=1.0):
    W = np.zeros(shape)
    for _ in range(iters):
        G, hessp = objective_grad_hessp(W)
        gnorm = np.linalg.norm(G)
        if gnorm <= gtol * scale:
            break
        HG = hessp(G)
        curvature = float(np.sum(G * HG))
        if curvature <= 0:
            break
        W = W - (gnorm ** 2 / curvature) * G
    return W


def right_oracle(A, C):
    def f(W):
        G = -2.0 * (A - W @ C) @ C.T
        return G, lambda V: 2.0 * (V @ C) @ C.T
    return gd_minimize(f, (A.shape[0], C.shape[0]), scale=np.linalg.norm(A) + 1)


def test_criterion_1_block_exactness():
    rng = np.random.default_rng(2001)
    checked = 0
    for _ in range(100):
        m = int(rng.integers(2, 21))
        h = int(rng.integers(1, min(m, 20)))
        c = int(rng.integers(1, 6))
        n = max(h, m) + int(rng.integers(4, 14))
        X = rng.normal(size=(m, n))
        labels = rng.integers(0, c, n)
        labels[:c] = np.arange(c)
        L = one_hot(labels, c)
        Z = rng.normal(size=(h, n))
        B = rng.normal(size=(h, n))
        lam, mu = 10.0, 1.0

        dec = solve_decoder(X, Z, 0.0)
        assert np.linalg.norm((X - dec @ Z) @ Z.T) / np.linalg.norm(X) <= 1e-8
        np.testing.assert_allclose(dec, right_oracle(X, Z), atol=1e-6)

        cmap = solve_class_map(L, Z, 0.0)
        assert np.linalg.norm((L - cmap @ Z) @ Z.T) / np.linalg.norm(L) <= 1e-8
        np.testing.assert_allclose(cmap, right_oracle(L, Z), atol=1e-6)

        enc = solve_encoder(Z, B, X, TrainConfig().resolved_activation(), 0.0)
        target = Z - B
        assert (np.linalg.norm((target - enc @ X) @ X.T)
                / np.linalg.norm(target) <= 1e-8)
        np.testing.assert_allclose(enc, right_oracle(target, X), atol=1e-6)

        w = LayerWeights(enc, dec, cmap, TrainConfig().resolved_activation())
        Zs = solve_code(X, L, B, w, lam, mu, 0.0)
        stacked_target = np.concatenate([X, np.sqrt(lam) * L,
                                         np.sqrt(mu) * (enc @ X + B)])
        design = np.concatenate([dec, np.sqrt(lam) * cmap, np.sqrt(mu) * np.eye(h)])
        resid = design.T @ (stacked_target - design @ Zs)
        assert np.linalg.norm(resid) / np.linalg.norm(stacked_target) <= 1e-8

        def f(Zv):
            G = (-2 * dec.T @ (X - dec @ Zv)
                 - 2 * lam * cmap.T @ (L - cmap @ Zv)
                 + 2 * mu * (Zv - (enc @ X + B)))
            return G, lambda V: 2 * (dec.T @ (dec @ V) + lam * cmap.T @ (cmap @ V) + mu * V)
        Z_ref = gd_minimize(f, Zs.shape, scale=np.linalg.norm(stacked_target) + 1)
        np.testing.assert_allclose(Zs, Z_ref, atol=1e-6)
        checked += 1
    report(1, f"{checked} random instances, residual <= 1e-8, oracle gap <= 1e-6")


# ---------------------------------------------------------------------------
# Criterion 2: monotone sweep descent + loss halving on a 500-sample subset


@pytest.fixture(scope="module")
def run_500(image_pools):
    train_pool, _, source = image_pools
    ds = subset(train_pool, 500, seed=202)
    L = one_hot(ds.labels, 10)
    cfg = TrainConfig(lam=10.0, mu=1.0, max_iter=20, tol=1e-15, seed=202)
    weights, state = train_layer(ds.X, L, 64, cfg)
    return ds, weights, state, source


def test_criterion_2_monotone_sweep_descent(run_500):
    _, _, state, source = run_500
    assert state.n_iter == 20
    for before, after in state.sweep_objectives:
        assert after <= before * (1 + 1e-9)
    after_values = [after for _, after in state.sweep_objectives]
    for a, b in zip(after_values, after_values[1:]):
        assert b <= a * (1 + 1e-9)
    first, last = state.trace[0], state.trace[-1]
    assert last.recon_loss < 0.5 * first.recon_loss
    assert last.disc_loss < 0.5 * first.disc_loss
    report(2, f"{source}: recon {last.recon_loss / first.recon_loss:.3f}x, "
              f"disc {last.disc_loss / first.disc_loss:.3f}x of iteration-1 values")


# ---------------------------------------------------------------------------
# Criterion 3: class separation vs the unsupervised baseline (2000 samples)


def test_criterion_3_fisher_ratio_beats_baseline(image_pools):
    train_pool, _, source = image_pools
    ds = subset(train_pool, 2000, seed=303)
    L = one_hot(ds.labels, 10)
    ratios = {}
    for lam in (10.0, 0.0):
        cfg = TrainConfig(lam=lam, mu=1.0, max_iter=20, tol=1e-15, seed=303)
        model = train_stack(ds.X, L, [392, 196, 98], cfg)
        feats = encode_stack(model, ds.X)
        ratios[lam] = fisher_ratio(LabeledFeatures(features=feats, labels=ds.labels))
    assert ratios[10.0] > ratios[0.0]
    report(3, f"{source}: fisher {ratios[10.0]:.4f} (supervised) > {ratios[0.0]:.4f} (baseline)")


# ---------------------------------------------------------------------------
# Criteria 4 + 5: desk-scale accuracy and convergence, end to end via the CLI


@pytest.fixture(scope="module")
def desk_run(image_pools, tmp_path_factory):
    train_pool, test_pool, source = image_pools
    root = tmp_path_factory.mktemp("desk")
    paths = {
        "train_images": root / "train-images.idx",
        "train_labels": root / "train-labels.idx",
        "test_images": root / "test-images.idx",
        "test_labels": root / "test-labels.idx",
    }
    side = train_pool.image_dims or (28, 28)

    def as_images(ds):
        arr = np.round(ds.X.T * 255.0).astype(np.uint8)
        return arr.reshape(ds.n_samples, *side)

    write_idx_images(paths["train_images"], as_images(train_pool))
    write_idx_labels(paths["train_labels"], train_pool.labels)
    write_idx_images(paths["test_images"], as_images(test_pool))
    write_idx_labels(paths["test_labels"], test_pool.labels)

    out = root / "out"
    cfg_path = root / "run.cfg"
    cfg_path.write_text(f"""
train.format = idx
train.images = {paths['train_images']}
train.labels = {paths['train_labels']}
train.subset = 10000
test.format = idx
test.images = {paths['test_images']}
test.labels = {paths['test_labels']}
test.subset = 2000
seed = 404
widths = 392,196,98
lam = 10
mu = 1
max_iter = 20
tol = 1e-12
damping = 1e-6
classifier = knn1
out = {out}
""")
    assert main(["train", str(cfg_path)]) == 0
    for k in range(3):
        assert (out / f"trace_layer{k}.csv").exists()
    assert main(["eval", str(cfg_path), "--model", str(out / "model.diae")]) == 0
    assert main(["baseline", str(cfg_path)]) == 0
    return out, source


def test_criterion_4_desk_scale_accuracy(desk_run):
    out, source = desk_run
    eval_report = read_report(out / "eval_report.txt")
    baseline_report = read_report(out / "baseline_report.txt")
    acc = float(eval_report["accuracy"])
    base_acc = float(baseline_report["accuracy"])
    assert acc >= 0.90
    assert acc > base_acc
    report(4, f"{source}: knn1 accuracy {acc:.4f} >= 0.90 and > baseline {base_acc:.4f}")


def test_criterion_5_convergence_within_budget(desk_run):
    """Final-iteration relative objective change < 1e-2 per layer.

    Known to fail on the synthetic corpus: with the default (verbatim)
    correction-variable update, the recorded objective keeps a slowly
    damped alternating component whose size tracks the irreducible
    least-squares residual of the one-hot label fit, so successive-iteration
    changes plateau well above 1e-2 even though the reconstruction and
    label losses themselves converge within a handful of sweeps.  The
    check is kept as stated; it runs against real MNIST when
    DIAE_MNIST_DIR is set.
    """
    out, source = desk_run
    train_report = read_report(out / "train_report.txt")
    rels = [float(train_report[f"layer{k}.final_rel_change"]) for k in range(3)]
    detail = ", ".join(f"{r:.2e}" for r in rels)
    verdict = "PASS" if all(r < 1e-2 for r in rels) else "FAIL"
    print(f"ACCEPTANCE 5: {verdict}  ({source}: final relative objective changes {detail})")
    for rel in rels:
        assert rel < 1e-2


# ---------------------------------------------------------------------------
# Criterion 6: KNN leave-in identity on trained features


def test_criterion_6_knn_leave_in(small_trained):
    train, weights, _ = small_trained
    feats = encode(weights, train.X)
    cols = {feats[:, j].tobytes() for j in range(feats.shape[1])}
    assert len(cols) == feats.shape[1]  # distinct columns
    labeled = LabeledFeatures(features=feats, labels=train.labels)
    predictions = knn_predict(labeled, feats, k=1)
    assert accuracy(predictions, train.labels) == 1.0
    report(6, f"{feats.shape[1]} training features re-queried at 100% accuracy")


# ---------------------------------------------------------------------------
# Criterion 7: format round-trips


def test_criterion_7_format_roundtrips(tmp_path, small_trained, small_corpus):
    train, weights, _ = small_trained
    # model save/load bitwise identity
    model = train_stack(train.X, one_hot(train.labels, 10), [24, 12],
                        TrainConfig(max_iter=4, seed=6))
    path = tmp_path / "model.diae"
    save_model(model, path)
    loaded = load_model(path)
    for a, b in zip(model.layers, loaded.layers):
        assert a.encoder.tobytes() == b.encoder.tobytes()
        assert a.decoder.tobytes() == b.decoder.tobytes()
        assert a.class_map.tobytes() == b.class_map.tobytes()
    save_model(loaded, tmp_path / "model2.diae")
    assert (tmp_path / "model2.diae").read_bytes() == path.read_bytes()

    # IDX writer/reader round-trip on a synthetic 2-image fixture
    images = np.array([[[0, 51], [102, 153]], [[204, 255], [10, 20]]], dtype=np.uint8)
    labels = np.array([1, 8])
    write_idx_images(tmp_path / "two.idx", images)
    write_idx_labels(tmp_path / "two-labels.idx", labels)
    ds = load_idx(tmp_path / "two.idx", tmp_path / "two-labels.idx")
    assert ds.X.tobytes() == (images.reshape(2, 4).T / 255.0).tobytes()
    assert ds.labels.tolist() == [1, 8]

    # feature export/import bitwise identity
    from diae.cli import export_features
    _, test = small_corpus
    dest = tmp_path / "features.csv"
    export_features(model, test, dest)
    reimported = load_delimited(dest, label_column=-1, skiprows=1, scale=False)
    feats = encode_stack(model, test.X)
    assert reimported.X.tobytes() == feats.tobytes()
    assert np.array_equal(reimported.labels, test.labels)
    report(7, "model, IDX and feature-export round-trips all bit-exact")


# ---------------------------------------------------------------------------
# Criterion 8: lam=0 weights are independent of label contents


def test_criterion_8_lam_zero_label_independence(small_corpus):
    train, _ = small_corpus
    cfg = TrainConfig(lam=0.0, max_iter=6, tol=1e-12, seed=51)
    L_true = one_hot(train.labels, 10)
    L_fake = one_hot((train.labels + 3) % 10, 10)
    w_true, _ = train_layer(train.X, L_true, 24, cfg)
    w_fake, _ = train_layer(train.X, L_fake, 24, cfg)
    assert w_true.encoder.tobytes() == w_fake.encoder.tobytes()
    assert w_true.decoder.tobytes() == w_fake.decoder.tobytes()
    report(8, "encoder and decoder bitwise identical under relabeling at lam=0")
