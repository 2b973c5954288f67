"""Grid spatio-temporal index over point columns.

Points are bucketed by (cell_x, cell_y, time_bucket). A probe looks at the 3x3
cell neighbourhood and the adjacent time buckets, which covers every point
within ``cell_size`` meters and ``bucket_width`` seconds of the query.

Cells come from an equirectangular projection with one x-scale per index,
``cos(max |lat|)`` of the indexed points plus a small margin. Using a single
scale (instead of the point's own latitude) keeps neighbouring points within
one cell of each other on both axes; using the largest latitude makes the
scale a lower bound for every point, so east-west cell distance never
overstates the true distance. Longitudes are not wrapped at +/-180.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import EARTH_RADIUS_M

_CY_OFFSET = 1 << 21
_CY_SPAN = 1 << 22
# headroom on latitude for probes slightly poleward of every indexed point
_LAT_MARGIN_RAD = 2e-4


@dataclass(frozen=True, slots=True)
class GridKey:
    cell_x: int
    cell_y: int
    time_bucket: int


def _lookup(sorted_vals, needles):
    pos = np.searchsorted(sorted_vals, needles)
    pos_c = np.minimum(pos, len(sorted_vals) - 1)
    hit = (pos < len(sorted_vals)) & (sorted_vals[pos_c] == needles)
    return pos_c, hit


class GridIndex:
    def __init__(self, lat, lon, ts, cell_size: float, bucket_width: int):
        lat = np.asarray(lat, dtype=np.float64)
        lon = np.asarray(lon, dtype=np.float64)
        ts = np.asarray(ts, dtype=np.int64)
        # 1e-6 slack absorbs float rounding at cell edges
        self.cell_size = float(cell_size) * (1 + 1e-6)
        self.bucket_width = max(int(bucket_width), 1)
        self.size = len(lat)
        phimax = float(np.abs(np.radians(lat)).max()) if len(lat) else 0.0
        phimax = min(phimax + _LAT_MARGIN_RAD, math.pi / 2)
        self.x_scale = max(math.cos(phimax), 0.0) * (1 - 1e-9)

        cx, cy = self._cells(lat, lon)
        b = ts // self.bucket_width
        ckey = cx * _CY_SPAN + (cy + _CY_OFFSET)
        self._ucells, cell_rank = np.unique(ckey, return_inverse=True)
        self._ubuckets, b_rank = np.unique(b, return_inverse=True)
        nb = max(len(self._ubuckets), 1)
        key = cell_rank.astype(np.int64) * nb + b_rank
        self._order = np.argsort(key, kind="stable")
        skey = key[self._order]
        self._ukeys, self._starts, self._counts = np.unique(skey, return_index=True, return_counts=True)
        self._nb = nb

    def _cells(self, lat, lon):
        y = EARTH_RADIUS_M * np.radians(lat)
        x = EARTH_RADIUS_M * np.radians(lon) * self.x_scale
        return (np.floor(x / self.cell_size).astype(np.int64),
                np.floor(y / self.cell_size).astype(np.int64))

    def key_of(self, lat: float, lon: float, t: int) -> GridKey:
        cx, cy = self._cells(np.array([lat]), np.array([lon]))
        return GridKey(int(cx[0]), int(cy[0]), int(t) // self.bucket_width)

    def groups(self) -> dict[GridKey, np.ndarray]:
        """Materialise the index as GridKey -> point positions (for inspection)."""
        out = {}
        for k, s, c in zip(self._ukeys.tolist(), self._starts.tolist(), self._counts.tolist()):
            ckey = int(self._ucells[k // self._nb])
            cx, cy = divmod(ckey, _CY_SPAN)
            out[GridKey(cx, cy - _CY_OFFSET, int(self._ubuckets[k % self._nb]))] = self._order[s:s + c]
        return out

    def probe(self, qlat, qlon, qts):
        """Candidate pairs ``(query_pos, point_pos)`` from the neighbouring cells.

        Result is a superset of the true neighbours; callers filter exactly.
        """
        qlat = np.atleast_1d(np.asarray(qlat, dtype=np.float64))
        qlon = np.atleast_1d(np.asarray(qlon, dtype=np.float64))
        qts = np.atleast_1d(np.asarray(qts, dtype=np.int64))
        empty = np.empty(0, dtype=np.int64)
        if self.size == 0 or len(qlat) == 0:
            return empty, empty
        qcx, qcy = self._cells(qlat, qlon)
        qb = qts // self.bucket_width
        qpos = np.arange(len(qlat), dtype=np.int64)

        bucket_hits = []
        for db in (-1, 0, 1):
            r, ok = _lookup(self._ubuckets, qb + db)
            bucket_hits.append((r, ok))

        q_parts, g_parts = [], []
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                ckey = (qcx + dx) * _CY_SPAN + (qcy + dy + _CY_OFFSET)
                crank, cok = _lookup(self._ucells, ckey)
                if not cok.any():
                    continue
                for brank, bok in bucket_hits:
                    ok = cok & bok
                    if not ok.any():
                        continue
                    g, gok = _lookup(self._ukeys, crank[ok] * self._nb + brank[ok])
                    q_parts.append(qpos[ok][gok])
                    g_parts.append(g[gok])
        if not q_parts:
            return empty, empty
        qsel = np.concatenate(q_parts)
        gsel = np.concatenate(g_parts)
        counts = self._counts[gsel]
        total = int(counts.sum())
        qi = np.repeat(qsel, counts)
        block_start = np.repeat(np.cumsum(counts) - counts, counts)
        within = np.arange(total, dtype=np.int64) - block_start
        pi = self._order[np.repeat(self._starts[gsel], counts) + within]
        return qi, pi
