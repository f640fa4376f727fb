"""The three restart archives side by side on one offer stream.

Run with: python demos/03_archives.py
"""

import numpy as np

from deskzero.archive import initialize_archive
from deskzero.games import apply_action, initial_state, legal_actions

# Build a stream of distinct positions at increasing depth.
rng = np.random.default_rng(1)
stream = []
state = initial_state("connect4")
while len(stream) < 3000:
    if state.is_terminal():
        state = initial_state("connect4")
    acts = legal_actions(state)
    state = apply_action(state, acts[rng.integers(len(acts))])
    if not state.is_terminal():
        stream.append(state)

s0 = initial_state("connect4")
expanding = initialize_archive("expanding", None, s0)
circular = initialize_archive("circular", 200, s0)
reservoir = initialize_archive("reservoir", 200, s0, rng=np.random.default_rng(2))

for archive in (expanding, circular, reservoir):
    archive.update(stream)

print(f"offered {len(stream)} states to each archive:")
for name, archive in [("expanding", expanding), ("circular", circular),
                      ("reservoir", reservoir)]:
    stats = archive.snapshot_stats()
    depths = [s.ply for s in archive.contents()]
    print(f"  {name:9s} size={stats['size']:5d} unique={stats['unique_keys']:5d} "
          f"mean stored depth={np.mean(depths):5.1f}")

print("\nthe circular archive keeps only the newest offers;")
print("the reservoir keeps a uniform sample of the whole history:")
recent_ids = {id(s) for s in stream[-200:]}
kept_recent = sum(1 for s in reservoir.contents() if id(s) in recent_ids)
print(f"  reservoir items from the last 200 offers: {kept_recent} "
      f"(expected about {200 * 200 / len(stream):.0f})")
print(f"  circular items from the last 200 offers: "
      f"{sum(1 for s in circular.contents() if id(s) in recent_ids)} (all of them)")

# Sampling favours duplicates since they are stored multiply.
dup = initialize_archive("expanding", None, s0)
dup.update([stream[0], stream[0], stream[1]])
draw_rng = np.random.default_rng(3)
hits = sum(dup.sample(draw_rng) == stream[0] for _ in range(10_000))
print(f"\nstate stored twice out of four entries is drawn "
      f"{hits / 10_000:.2f} of the time")
