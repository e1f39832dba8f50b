"""
Tiling the WHU-CD mosaic
========================

The WHU-CD test mosaic (15354 rows × 32507 columns) is cut into 1024-pixel
windows whose starts are spread evenly along each axis, so the last window
ends exactly at the border. This gives 15 × 32 = 480 tiles, with neighbouring
windows overlapping slightly.
"""

import numpy as np

from scm.datasets import tile_whu

specs = tile_whu((15354, 32507), 1024)
rows = sorted({s.row_start for s in specs})
cols = sorted({s.col_start for s in specs})
print(f"{len(specs)} tiles: {len(rows)} rows × {len(cols)} columns")
print("row starts:", rows)
print("column overlap (px):", sorted({int(d) for d in 1024 - np.diff(cols)}))
print("row overlap (px):", sorted({int(d) for d in 1024 - np.diff(rows)}))

# A plain non-overlapping grid would drop the ragged border: 14 × 31 = 434 tiles.
print("non-overlapping grid:", (15354 // 1024) * (32507 // 1024))
