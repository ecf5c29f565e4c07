"""Weighted index over lattice sites.

A complete binary tree stored in a flat list: leaf ``capacity + i`` holds the weight of site
``i`` and every internal node holds the sum of its two children. Parents are recomputed from
their children on every update rather than adjusted by differences, so the root is a fixed
function of the leaves and does not drift as weights change.
"""


def _next_power_of_two(n):
    capacity = 1
    while capacity < n:
        capacity <<= 1
    return capacity


class SumSegmentTree:
    """Sum tree supporting ``O(log n)`` updates and proportional sampling.

    Args:
        size (int): number of leaves that can carry a weight; the tree rounds this up to a
            power of two and the extra leaves stay at zero
    """

    def __init__(self, size):
        if size < 1:
            raise ValueError("a sum tree needs at least one leaf")
        self.size = size
        self._capacity = _next_power_of_two(size)
        self._value = [0.0] * (2 * self._capacity)

    def __len__(self):
        return self.size

    def __getitem__(self, idx):
        if not 0 <= idx < self.size:
            raise IndexError("leaf {} outside [0, {})".format(idx, self.size))
        return self._value[self._capacity + idx]

    def __setitem__(self, idx, val):
        if not 0 <= idx < self.size:
            raise IndexError("leaf {} outside [0, {})".format(idx, self.size))
        value = self._value
        idx += self._capacity
        value[idx] = val
        idx >>= 1
        while idx >= 1:
            value[idx] = value[idx << 1] + value[idx << 1 | 1]
            idx >>= 1

    @property
    def total(self):
        """float: sum of all leaf weights"""
        return self._value[1]

    def leaves(self):
        """list[float]: copy of the leaf weights in site order"""
        return self._value[self._capacity:self._capacity + self.size]

    def rebuild(self, weights=None):
        """Recompute every internal node bottom-up.

        Args:
            weights (Sequence[float]): optional replacement for all leaf weights
        """
        value = self._value
        cap = self._capacity
        if weights is not None:
            if len(weights) != self.size:
                raise ValueError("expected {} weights, got {}".format(self.size, len(weights)))
            value[cap:cap + self.size] = [float(w) for w in weights]
        for idx in range(cap - 1, 0, -1):
            value[idx] = value[idx << 1] + value[idx << 1 | 1]

    def find_prefixsum_idx(self, prefixsum):
        """Find the leaf whose cumulative interval contains ``prefixsum``.

        Returns the smallest ``i`` with ``w[0] + ... + w[i] > prefixsum``. Drawing
        ``prefixsum`` uniformly from ``[0, total)`` therefore selects leaf ``i`` with
        probability ``w[i] / total``. Leaves of weight zero are never returned.

        Args:
            prefixsum (float): point in ``[0, total)``

        Returns:
            int: the selected leaf
        """
        value = self._value
        idx = 1
        while idx < self._capacity:
            left = idx << 1
            if value[left] > prefixsum:
                idx = left
            else:
                prefixsum -= value[left]
                idx = left | 1
        # rounding can walk past the last positive leaf when prefixsum is close to the total
        while value[idx] <= 0.0 and idx > self._capacity:
            idx -= 1
        return idx - self._capacity
