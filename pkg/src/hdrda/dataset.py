"""Labeled observation matrices."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """An ``N x p`` observation matrix with one class label per row.

    Class labels are mapped to contiguous indices ``0..K-1``; ``classes[k]``
    recovers the original label of index ``k``. Index order is also the
    tie-break order used by the classifier.

    Use :meth:`from_labels` to build one from raw labels.
    """

    observations: np.ndarray
    labels: np.ndarray
    classes: np.ndarray
    feature_names: tuple | None = None
    class_counts: np.ndarray = field(init=False)

    def __post_init__(self):
        x = np.asarray(self.observations, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.intp)
        if x.ndim != 2:
            raise InputError(f"observations must be 2-D, got shape {x.shape}")
        if y.ndim != 1 or y.shape[0] != x.shape[0]:
            raise InputError(
                f"label vector of length {y.shape[0] if y.ndim == 1 else y.shape} "
                f"does not match {x.shape[0]} observations"
            )
        n_classes = len(self.classes)
        if n_classes == 0:
            raise InputError("dataset has no classes")
        if y.size and (y.min() < 0 or y.max() >= n_classes):
            raise InputError("label indices out of range")
        counts = np.bincount(y, minlength=n_classes)
        if np.any(counts == 0):
            missing = [self.classes[k] for k in np.flatnonzero(counts == 0)]
            raise InputError(f"classes without observations: {missing}")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "observations", x)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "classes", np.asarray(self.classes))
        object.__setattr__(self, "class_counts", counts)
        if self.feature_names is not None:
            names = tuple(self.feature_names)
            if len(names) != x.shape[1]:
                raise InputError(f"{len(names)} feature names for {x.shape[1]} columns")
            object.__setattr__(self, "feature_names", names)

    @classmethod
    def from_labels(cls, observations, labels, classes=None, feature_names=None) -> LabeledDataset:
        """Build a dataset from raw labels.

        Parameters
        ----------
        observations : array-like of shape (N, p)
        labels : array-like of shape (N,)
            Arbitrary hashable labels.
        classes : sequence, optional
            Class order. Defaults to the sorted unique labels.
        """
        labels = np.asarray(labels)
        if classes is None:
            classes, index = np.unique(labels, return_inverse=True)
        else:
            classes = np.asarray(classes)
            lookup = {c: i for i, c in enumerate(classes.tolist())}
            try:
                index = np.array([lookup[v] for v in labels.tolist()], dtype=np.intp)
            except KeyError as exc:
                raise InputError(f"label {exc.args[0]!r} not in classes") from None
        return cls(observations, np.asarray(index).ravel(), classes, feature_names)

    @property
    def n(self) -> int:
        return self.observations.shape[0]

    @property
    def p(self) -> int:
        return self.observations.shape[1]

    @property
    def k(self) -> int:
        return len(self.classes)

    def class_rows(self, k: int) -> np.ndarray:
        return self.observations[self.labels == k]

    def subset(self, rows) -> LabeledDataset:
        """Rows ``rows`` of the dataset, keeping the full class list."""
        return LabeledDataset(self.observations[rows], self.labels[rows], self.classes,
                              self.feature_names)

    def with_columns(self, columns) -> LabeledDataset:
        names = None
        if self.feature_names is not None:
            names = [self.feature_names[j] for j in np.asarray(columns).tolist()]
        return LabeledDataset(self.observations[:, columns], self.labels, self.classes, names)
