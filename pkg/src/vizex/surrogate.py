"""Decision-tree surrogate baseline: 95 visual features per sampled frame,
a depth-limited CART classifier over counting-error classes, and the
train/test balanced-accuracy protocol.

Feature columns, in order: 5 whole-image features (avg R, avg G, avg B,
luminosity, edge fraction), the same 5 for each cell of a 4x4 grid
(row-major), then the 5 averaged over ground-truth boxes and over detected
boxes. 95 columns plus the class label.

The tree is grown greedily on weighted Gini impurity with class weights
inversely proportional to training-set class frequency. Thresholds are
midpoints of adjacent distinct feature values; ties between splits resolve to
the lowest (impurity, column, threshold). Growth is fully deterministic; the
seed parameter exists for interface stability only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateLabels
from .ingest import FrameSequence, PredictionLog
from .kpi import CannyParams, Region, average_color, box_region_features, edge_fraction, luminosity
from .metrics import count_error_class

BASE_FEATURES = ("avg_r", "avg_g", "avg_b", "luminosity", "edge_fraction")

FEATURE_COLUMNS: tuple[str, ...] = (
    tuple(f"whole_{f}" for f in BASE_FEATURES)
    + tuple(
        f"cell_{r}_{c}_{f}" for r in range(4) for c in range(4) for f in BASE_FEATURES
    )
    + tuple(f"gt_boxes_{f}" for f in BASE_FEATURES)
    + tuple(f"det_boxes_{f}" for f in BASE_FEATURES)
)

CLASSES = (-1, 0, 1)


@dataclass(frozen=True)
class FeatureTable:
    scene_id: str
    features: np.ndarray  # (n_rows, 95) float64
    labels: np.ndarray  # (n_rows,) int, values in {-1, 0, 1}
    frame_indices: np.ndarray  # (n_rows,) int

    def __post_init__(self):
        assert self.features.shape[1] == len(FEATURE_COLUMNS)
        assert len(self.labels) == len(self.features) == len(self.frame_indices)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(",".join(FEATURE_COLUMNS) + ",label\n")
            for row, label in zip(self.features, self.labels):
                fh.write(",".join(repr(float(v)) for v in row) + f",{int(label)}\n")

    @staticmethod
    def from_csv(path, scene_id: str = "") -> "FeatureTable":
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            assert tuple(header) == FEATURE_COLUMNS + ("label",), "unexpected CSV header"
            feats, labels = [], []
            for line in fh:
                parts = line.strip().split(",")
                feats.append([float(v) for v in parts[:-1]])
                labels.append(int(parts[-1]))
        n = len(feats)
        return FeatureTable(
            scene_id=scene_id,
            features=np.array(feats, dtype=np.float64).reshape(n, len(FEATURE_COLUMNS)),
            labels=np.array(labels, dtype=np.int64),
            frame_indices=np.arange(n, dtype=np.int64),
        )


def _frame_features(pixels: np.ndarray, gt_boxes, det_boxes, canny: CannyParams) -> list[float]:
    h, w = pixels.shape[0], pixels.shape[1]

    def five(region: Region) -> list[float]:
        r, g, b = average_color(pixels, region)
        return [r, g, b, luminosity(pixels, region), edge_fraction(pixels, region, canny)]

    row = five(Region.whole(w, h))
    for gr in range(4):
        for gc in range(4):
            row.extend(five(Region.grid_cell(w, h, gr, gc)))
    for boxes in (gt_boxes, det_boxes):
        feats = box_region_features(pixels, boxes, canny)
        row.extend([*feats.avg_color, feats.luminosity, feats.edge_fraction])
    return row


def build_feature_table(
    sequence: FrameSequence,
    pred_log: PredictionLog,
    gt_log: PredictionLog,
    sample_stride: int,
    scene_id: str = "scene",
    canny: CannyParams = CannyParams(),
) -> FeatureTable:
    """One row per sampled frame (stride = frames per sample; stride round(fps)
    gives one sample per second). Frames must be at least 20x20 so every
    4x4-grid cell meets the edge detector's 5x5 support."""
    assert sample_stride >= 1
    label = sequence.manifest.label_of_interest
    rows, labels, frames = [], [], []
    for t in range(0, sequence.manifest.frame_count, sample_stride):
        px = sequence.frames[t].pixels
        gt_boxes = gt_log.boxes_at(t)
        det_boxes = pred_log.boxes_at(t)
        rows.append(_frame_features(px, gt_boxes, det_boxes, canny))
        det = sum(1 for b in det_boxes if b.label == label)
        gt = sum(1 for b in gt_boxes if b.label == label)
        labels.append(count_error_class(det, gt))
        frames.append(t)
    return FeatureTable(
        scene_id=scene_id,
        features=np.array(rows, dtype=np.float64).reshape(len(rows), len(FEATURE_COLUMNS)),
        labels=np.array(labels, dtype=np.int64),
        frame_indices=np.array(frames, dtype=np.int64),
    )


# ---------------------------------------------------------------------------
# CART


@dataclass
class TreeNode:
    prediction: int
    votes: dict[int, float]  # weighted class votes
    feature: int | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    def is_leaf(self) -> bool:
        return self.feature is None

    def to_json(self) -> dict:
        out: dict = {"prediction": self.prediction, "votes": {str(k): v for k, v in self.votes.items()}}
        if not self.is_leaf():
            out.update(
                feature=self.feature,
                feature_name=FEATURE_COLUMNS[self.feature] if self.feature < len(FEATURE_COLUMNS) else str(self.feature),
                threshold=self.threshold,
                left=self.left.to_json(),
                right=self.right.to_json(),
            )
        return out


@dataclass
class TreeModel:
    root: TreeNode
    max_depth: int
    classes: tuple[int, ...]
    class_weights: dict[int, float]

    def predict_one(self, row: np.ndarray) -> int:
        node = self.root
        while not node.is_leaf():
            node = node.left if row[node.feature] <= node.threshold else node.right
        return node.prediction

    def predict(self, features: np.ndarray) -> np.ndarray:
        return np.array([self.predict_one(r) for r in features], dtype=np.int64)

    def depth(self) -> int:
        def walk(node, d):
            if node.is_leaf():
                return d
            return max(walk(node.left, d + 1), walk(node.right, d + 1))

        return walk(self.root, 0)

    def serialize(self) -> str:
        return json.dumps(
            {
                "max_depth": self.max_depth,
                "classes": list(self.classes),
                "class_weights": {str(k): v for k, v in self.class_weights.items()},
                "root": self.root.to_json(),
            },
            sort_keys=True,
        )


def _weighted_term(counts_per_class, weights) -> float:
    """W - (sum_k W_k^2) / W for one child, accumulated in class order.

    counts_per_class may be scalars or aligned numpy arrays (one per class).
    """
    total = None
    sumsq = None
    for c, w in zip(counts_per_class, weights):
        wc = w * c
        total = wc if total is None else total + wc
        sq = wc * wc
        sumsq = sq if sumsq is None else sumsq + sq
    return total - sumsq / total


def best_split(features: np.ndarray, labels: np.ndarray, weights: dict[int, float], classes):
    """Exhaustive midpoint search; returns (score, feature, threshold) or None.

    The score is the sum of both children's weighted Gini terms; lower is
    better. Ties resolve to the lowest column then lowest threshold.
    """
    n = len(labels)
    class_list = list(classes)
    w_vec = [weights[c] for c in class_list]
    onehot = np.stack([(labels == c).astype(np.float64) for c in class_list], axis=1)

    best: tuple[float, int, float] | None = None
    for col in range(features.shape[1]):
        vals = features[:, col]
        order = np.argsort(vals, kind="stable")
        sorted_vals = vals[order]
        cum = np.cumsum(onehot[order], axis=0)  # class counts among first i rows
        distinct = np.nonzero(sorted_vals[:-1] < sorted_vals[1:])[0]
        if len(distinct) == 0:
            continue
        thresholds = (sorted_vals[distinct] + sorted_vals[distinct + 1]) / 2.0
        # guard against midpoints rounding up onto the right value
        ok = thresholds < sorted_vals[distinct + 1]
        distinct, thresholds = distinct[ok], thresholds[ok]
        if len(distinct) == 0:
            continue
        left_counts = [cum[distinct, k] for k in range(len(class_list))]
        total_counts = [cum[-1, k] for k in range(len(class_list))]
        right_counts = [tc - lc for tc, lc in zip(total_counts, left_counts)]
        scores = _weighted_term(left_counts, w_vec) + _weighted_term(right_counts, w_vec)
        i = int(np.argmin(scores))
        if best is None or scores[i] < best[0]:
            best = (float(scores[i]), col, float(thresholds[i]))
    return best


def balanced_class_weights(labels: np.ndarray, classes=CLASSES) -> dict[int, float]:
    """n / (k * count_c) over the classes present; absent classes get weight 0."""
    present = [c for c in classes if np.any(labels == c)]
    n, k = len(labels), len(present)
    out = {c: 0.0 for c in classes}
    for c in present:
        out[c] = n / (k * float(np.sum(labels == c)))
    return out


def train_tree(table: FeatureTable, max_depth: int = 10, seed: int = 0) -> TreeModel:
    """Greedy CART growth; deterministic given the table (seed is unused but
    kept so callers can pin one)."""
    features, labels = table.features, table.labels
    if len(labels) < 2 or len(np.unique(labels)) < 2:
        raise DegenerateLabels(f"{len(labels)} rows, {len(np.unique(labels))} distinct labels")
    weights = balanced_class_weights(labels)
    classes = CLASSES

    def leaf(idx) -> TreeNode:
        votes = {c: weights[c] * float(np.sum(labels[idx] == c)) for c in classes}
        best_class = max(classes, key=lambda c: (votes[c], -c))  # ties to lowest class
        return TreeNode(prediction=best_class, votes=votes)

    def grow(idx: np.ndarray, depth: int) -> TreeNode:
        node = leaf(idx)
        if depth >= max_depth or len(idx) < 2 or len(np.unique(labels[idx])) < 2:
            return node
        found = best_split(features[idx], labels[idx], weights, classes)
        if found is None:
            return node
        _, col, threshold = found
        mask = features[idx, col] <= threshold
        node.feature = col
        node.threshold = threshold
        node.left = grow(idx[mask], depth + 1)
        node.right = grow(idx[~mask], depth + 1)
        return node

    root = grow(np.arange(len(labels)), 0)
    return TreeModel(root=root, max_depth=max_depth, classes=classes, class_weights=weights)


def balanced_accuracy(predictions, labels) -> float:
    """Unweighted mean of per-class recall over classes present in labels."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    assert len(predictions) == len(labels) >= 1
    recalls = []
    for c in np.unique(labels):
        mask = labels == c
        recalls.append(float(np.mean(predictions[mask] == c)))
    return float(np.mean(recalls))


@dataclass(frozen=True)
class BaselineReport:
    train_scenes: tuple[str, ...]
    test_scenes: tuple[str, ...]
    balanced_training_accuracy: float
    balanced_testing_accuracy: float
    n_train_rows: int
    n_test_rows: int
    max_depth: int

    def to_json(self) -> dict:
        return {
            "train_scenes": list(self.train_scenes),
            "test_scenes": list(self.test_scenes),
            "balanced_training_accuracy": self.balanced_training_accuracy,
            "balanced_testing_accuracy": self.balanced_testing_accuracy,
            "n_train_rows": self.n_train_rows,
            "n_test_rows": self.n_test_rows,
            "max_depth": self.max_depth,
        }


def _concat(tables: list[FeatureTable], scene_id: str) -> FeatureTable:
    return FeatureTable(
        scene_id=scene_id,
        features=np.concatenate([t.features for t in tables]),
        labels=np.concatenate([t.labels for t in tables]),
        frame_indices=np.concatenate([t.frame_indices for t in tables]),
    )


def evaluate_split(
    tables: dict[str, FeatureTable],
    train_scenes: list[str],
    test_scenes: list[str],
    max_depth: int = 10,
    seed: int = 0,
) -> BaselineReport:
    """Train on the union of train scenes, report balanced accuracy on both
    the training rows and the held-out test rows."""
    assert not (set(train_scenes) & set(test_scenes)) or train_scenes == test_scenes
    train = _concat([tables[s] for s in train_scenes], "train")
    test = _concat([tables[s] for s in test_scenes], "test")
    model = train_tree(train, max_depth=max_depth, seed=seed)
    return BaselineReport(
        train_scenes=tuple(train_scenes),
        test_scenes=tuple(test_scenes),
        balanced_training_accuracy=balanced_accuracy(model.predict(train.features), train.labels),
        balanced_testing_accuracy=balanced_accuracy(model.predict(test.features), test.labels),
        n_train_rows=len(train.labels),
        n_test_rows=len(test.labels),
        max_depth=max_depth,
    )
