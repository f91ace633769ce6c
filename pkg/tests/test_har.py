import json
import logging

import numpy as np
import pytest
from hypothesis import given, strategies as st

from simhar.encoder import EncoderConfig, EncoderState, build_vocab
from simhar.errors import ConfigError, EmptyTrainSet, LengthMismatch, UnknownJointName
from simhar.har import (SHOTS, EvalReport, HarDataset, HarRecord, KShotClassifier, ZeroShotClassifier,
                        align_channels, build_har_dataset, evaluate, finetune, k_shot_finetune, macro_f1,
                        zero_shot_classify)
from simhar.har.classify import argmax_labels, predict_head, zero_shot_scores
from simhar.skeleton import JOINT_NAMES

CFG = EncoderConfig(embed_dim=8, window=16, channels=(8, 8), seed=0)
LABELS = {"jump": "a person jumps", "walk": "a person walks", "wave": "someone waves"}


@pytest.fixture(scope="module")
def state():
    return EncoderState.initialize(CFG, build_vocab(LABELS.values()))


def _dataset(n_train=3, n_test=2, joints=("left_wrist", "right_ankle"), seed=0, name="toy"):
    g = np.random.default_rng(seed)
    records, train, test = {}, [], []
    for c in sorted(LABELS):
        for i in range(n_train + n_test):
            rid = f"{name}-{c}-{i}"
            records[rid] = HarRecord(rid, c, g.normal(size=(20, len(joints), 6)) + (sorted(LABELS).index(c)))
            (train if i < n_train else test).append(rid)
    return HarDataset(name, records, tuple(sorted(LABELS)), LABELS, {"train": train, "test": test}, joints)


# channel alignment

def test_all_joints_is_identity():
    data = np.random.default_rng(0).normal(size=(5, 24, 6))
    out = align_channels(data, JOINT_NAMES)
    np.testing.assert_array_equal(out.frames, data)
    assert out.observed_mask.all()


def test_wrist_only():
    out = align_channels(np.ones((5, 1, 6)), ["left_wrist"])
    f = np.asarray(out.frames)
    assert (np.abs(f).sum(axis=(0, 2)) > 0).sum() == 1
    assert out.observed_mask.sum() == 1 and out.observed_mask[JOINT_NAMES.index("left_wrist")]


def test_unobserved_is_bitwise_zero():
    out = np.asarray(align_channels(np.full((3, 2, 6), np.pi), [3, "head"]).frames)
    keep = np.zeros(24, bool)
    keep[[3, JOINT_NAMES.index("head")]] = True
    assert np.all(out[:, ~keep] == 0.0) and not np.signbit(out[:, ~keep]).any()


def test_unknown_joint():
    with pytest.raises(UnknownJointName):
        align_channels(np.ones((3, 1, 6)), ["tail"])
    with pytest.raises(UnknownJointName):
        align_channels(np.ones((3, 1, 6)), [24])


def test_alignment_hides_unobserved_values(state):
    ds = _dataset(joints=("left_wrist",))
    rid = ds.ids("test")[0]
    a = np.asarray(ds.aligned(rid).frames)
    garbage = a.copy()
    garbage[:, 5] = 123.0  # values a device might have produced at an unobserved joint
    realigned = align_channels(garbage[:, [JOINT_NAMES.index("left_wrist")]], ["left_wrist"])
    np.testing.assert_array_equal(state.encode_motion(realigned.frames[:16]), state.encode_motion(a[:16]))


# 0-shot

def test_engineered_match_wins(state):
    zt = state.encode_text(["a person walks"])[0]
    scores = np.array([[zt @ state.encode_text(LABELS[c]) for c in sorted(LABELS)]])
    assert argmax_labels(sorted(LABELS), scores) == ["walk"]


def test_zero_shot_returns_class_and_scores(state):
    imu = np.random.default_rng(0).normal(size=(16, 24, 6))
    pred, scores = zero_shot_classify(state, imu, LABELS)
    assert pred in LABELS and set(scores) == set(LABELS)
    assert pred == max(sorted(scores), key=lambda c: scores[c])


def test_exact_tie_goes_to_lexicographic_first(state):
    dup = {"b-class": "a person walks", "a-class": "a person walks", "c-class": "someone waves"}
    classes, scores = zero_shot_scores(state, np.zeros((1, 16, 24, 6)), dup)
    scores[:, 2] = -1.0
    assert argmax_labels(classes, scores) == ["a-class"]


@given(st.floats(1e-3, 1e3))
def test_prediction_invariant_to_positive_rescaling(c):
    scores = np.random.default_rng(0).normal(size=(20, 3))
    assert argmax_labels(["a", "b", "c"], scores) == argmax_labels(["a", "b", "c"], c * scores)


def test_zero_shot_needs_two_classes(state):
    with pytest.raises(ConfigError):
        zero_shot_scores(state, np.zeros((1, 16, 24, 6)), {"walk": "a person walks"})


# k-shot

def test_large_k_uses_full_train_split(state, caplog):
    ds = _dataset()
    with caplog.at_level(logging.WARNING):
        tuned, head = k_shot_finetune(state, ds, 50, seed=0, epochs=1)
    assert "fewer than k=50" in caplog.text
    assert head.classes == ds.label_set


def test_k_shot_is_deterministic(state):
    ds = _dataset()
    a = k_shot_finetune(state, ds, 2, seed=4, epochs=3)
    b = k_shot_finetune(state, ds, 2, seed=4, epochs=3)
    np.testing.assert_array_equal(a[1].W, b[1].W)
    np.testing.assert_array_equal(a[1].b, b[1].b)


def test_finetune_leaves_pretrained_state_alone(state):
    before = {k: v.copy() for k, v in state.params.items()}
    k_shot_finetune(state, _dataset(), 1, seed=0, epochs=2)
    assert all(np.array_equal(before[k], state.params[k]) for k in before)


def test_separable_embeddings_reach_full_train_accuracy(state):
    # frozen encoder; the two classes embed close together but are linearly separable
    g = np.random.default_rng(0)
    frames = [g.normal(0, 0.1, size=(16, 24, 6)) + (3.0 if i % 2 else -3.0) for i in range(16)]
    labels = ["up" if i % 2 else "down" for i in range(16)]
    z = state.encode_motion(np.stack(frames))
    assert (z[1::2] @ z[1::2].mean(0)).min() > (z[::2] @ z[1::2].mean(0)).max()  # separable fixture
    tuned, head = finetune(state, frames, labels, ["down", "up"], seed=0, freeze_encoder=True,
                           learning_rate=1e-1, epochs=300)
    assert predict_head(tuned, head, np.stack(frames)) == labels
    assert all(np.array_equal(tuned.params[k], state.params[k]) for k in state.params)


def test_empty_train_set(state):
    ds = _dataset(n_train=0)
    with pytest.raises(EmptyTrainSet):
        k_shot_finetune(state, ds, 1, seed=0)


class _AuditedDataset(HarDataset):
    """Records every id read through ``record``."""

    def __post_init__(self):
        super().__post_init__()
        self.reads = []

    def record(self, rid):
        self.reads.append(rid)
        return super().record(rid)


def test_finetuning_never_reads_test_split(state):
    base = _dataset()
    ds = _AuditedDataset(base.name, base.records, base.label_set, base.label_texts, base.splits,
                         base.observed_joints)
    k_shot_finetune(state, ds, 2, seed=1, epochs=1)
    assert ds.reads and not set(ds.reads) & set(ds.ids("test"))


# macro-F1

def test_macro_f1_cases():
    assert macro_f1(["A", "B"], ["A", "B"]) == 1.0
    assert macro_f1(list("ABBB"), list("AABB"), ["A", "B"]) == pytest.approx((2 / 3 + 0.8) / 2, abs=1e-15)
    assert macro_f1(list("ABBB"), list("AABB"), ["A", "B"]) == pytest.approx(0.7333333333333333, abs=1e-15)
    assert macro_f1(list("AAAA"), list("AABB"), ["A", "B"]) == pytest.approx(1 / 3, abs=1e-15)


def test_macro_f1_absent_class_counts_zero():
    assert macro_f1(["A", "A"], ["A", "A"], ["A", "Z"]) == 0.5


def test_macro_f1_length_mismatch():
    with pytest.raises(LengthMismatch):
        macro_f1(["A"], ["A", "B"])


def test_macro_f1_matches_sklearn():
    from sklearn.metrics import f1_score
    g = np.random.default_rng(0)
    y, p = g.integers(0, 5, 200), g.integers(0, 5, 200)
    assert macro_f1(p, y, range(5)) == pytest.approx(f1_score(y, p, average="macro", labels=range(5)), abs=1e-12)


@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=40), st.permutations(range(4)))
def test_macro_f1_relabel_invariance(pairs, perm):
    p, y = zip(*pairs)
    names = ["w", "x", "y", "z"]
    a = macro_f1([names[i] for i in p], [names[i] for i in y], names)
    b = macro_f1([names[perm[i]] for i in p], [names[perm[i]] for i in y], [names[perm[i]] for i in range(4)])
    assert a == pytest.approx(b, abs=1e-15)


# evaluation

def test_single_dataset_mean_equals_dataset(state):
    rep = evaluate(state, [_dataset()], shots=(0, 1), seeds=(0,), finetune_kwargs={"epochs": 1})
    for k in (0, 1):
        assert rep.mean[k] == rep.per_dataset["toy"][k]


def test_dataset_order_does_not_matter(state):
    a, b = _dataset(name="a", seed=1), _dataset(name="b", seed=2)
    kw = {"shots": (0, 2), "seeds": (0, 1), "finetune_kwargs": {"epochs": 1}}
    assert evaluate(state, [a, b], **kw).to_json() == evaluate(state, [b, a], **kw).to_json()


def test_report_layout_and_mean(state):
    rep = evaluate(state, [_dataset(name="a"), _dataset(name="b", seed=3)], shots=SHOTS, seeds=(0,),
                   finetune_kwargs={"epochs": 1}, config_digest="abc")
    header = rep.table_csv().splitlines()[0].split(",")
    assert header == ["dataset", "0-shot", "1-shot", "2-shot", "3-shot", "5-shot", "10-shot"]
    for k in SHOTS:
        assert abs(rep.mean[k] - np.mean([rep.per_dataset[n][k] for n in ("a", "b")])) < 1e-12
    back = EvalReport.from_json(json.loads(rep.dumps()))
    assert back.to_json() == rep.to_json() and back.config_digest == "abc"


def test_evaluate_needs_datasets(state):
    with pytest.raises(ConfigError):
        evaluate(state, [])


# datasets

def test_dataset_invariants():
    ds = _dataset()
    with pytest.raises(Exception):
        HarDataset("x", ds.records, ds.label_set, ds.label_texts,
                   {"train": ds.ids("train"), "test": ds.ids("train")}, ds.observed_joints)
    with pytest.raises(Exception):
        HarDataset("x", ds.records, ds.label_set, ds.label_texts, {"train": ds.ids("test"), "test": []},
                   ds.observed_joints)


def test_dataset_save_load(tmp_path):
    ds = build_har_dataset("h", ("walk", "jump"), 2, 1, n_observed=3, seed=5)
    ds.save(tmp_path / "h")
    back = HarDataset.load(tmp_path / "h")
    assert back.ids("test") == ds.ids("test") and back.observed_joints == ds.observed_joints
    rid = ds.ids("train")[0]
    np.testing.assert_array_equal(back.record(rid).data, ds.record(rid).data.astype(np.float32))


def test_built_dataset_has_held_out_seeds():
    a = build_har_dataset("h", ("walk", "kick"), 2, 2, n_observed=4, seed=1)
    assert len(a.observed_joints) == 4 and set(a.label_set) == {"walk", "kick"}
    assert len(a.ids("train")) == 4 and len(a.ids("test")) == 4


# estimators

def test_zero_shot_estimator(state):
    clf = ZeroShotClassifier(state, LABELS).fit()
    X = np.random.default_rng(0).normal(size=(4, 16, 24, 6))
    assert set(clf.predict(X)) <= set(LABELS)
    assert clf.decision_function(X).shape == (4, 3)


def test_k_shot_estimator(state):
    ds = _dataset()
    X = [ds.aligned(r).frames for r in ds.ids("train")]
    y = [ds.record(r).label for r in ds.ids("train")]
    clf = KShotClassifier(state, epochs=2).fit(X, y)
    assert list(clf.classes_) == sorted(LABELS)
    assert len(clf.predict(X)) == len(y)
    assert 0.0 <= clf.score(X, y) <= 1.0
