# %% [markdown]
# # Uniform rates for the flow construction
#
# For the suspension of the cat map, the fiber map uses the time-`N` flow
# on the low part.  The bundles then satisfy a global rate sandwich for a
# large iterate `k`.  The one-step check with the profile's own constants
# fails, since those rates are attained exactly on the floor and the roof.

# %%
import numpy as np

from skewswitch.base_systems import SuspensionFlow, make_linear_anosov
from skewswitch.profiles import build_profile
from skewswitch.skew_product import build_tower
from skewswitch import splitting as S

cat = make_linear_anosov([[2, 1], [1, 1]], 1)
flow = SuspensionFlow(cat)
tower = build_tower(flow, build_profile(0.25, 0.4, 1.8, 0.9, N=2), mode="flow", epsilon=0.003125)

# %% [markdown]
# A coarse 4^4 grid keeps this quick; the CLI runs 16^4.

# %%
m = 4
g = np.arange(m) / m
grid = np.stack(np.meshgrid(g, g, g, -1 + 2 * g, indexing="ij"), -1).reshape(-1, 4)
lam = np.sqrt(0.25 * flow.mu_s)
mu = np.sqrt(1.8 * flow.mu_u)
for k, (l, u) in [(64, (lam, mu)), (1, (0.25, 1.8))]:
    res = S.absolute_ph_check(tower, grid, l, u, k=k)
    print(f"k={k:3d} lambda={l:.4f} mu={u:.4f} worst margin={res['worst_margin']:+.4f}")
    print("   ", {key: round(v, 4) for key, v in res["margins"].items()})
