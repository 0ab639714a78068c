# %% [markdown]
# # Curves tangent to the center-stable plane fall to the floor
#
# Inside the center-stable plane there is a line field whose vertical
# component never vanishes off the floor.  Integrating it from heights in
# `(0, c]` gives curves that descend monotonically to `z = 0` with bounded
# horizontal length, which is the obstruction to a center-stable foliation.

# %%
import numpy as np

from skewswitch.base_systems import make_linear_anosov
from skewswitch.profiles import build_profile
from skewswitch.skew_product import build_tower
from skewswitch import incoherence as I

tower = build_tower(make_linear_anosov([[2, 1], [1, 1]], 1), build_profile(0.25, 0.4, 1.8, 0.9), epsilon=0.05)
c = tower.top.profile.c
print(f"c = {c:.6f}")

# %%
rng = np.random.default_rng(0)
res = I.sign_dichotomy(tower, I.random_low_points(tower, 200, rng))
print("sign dichotomy:", res)

# %% [markdown]
# Integrate a small grid of falling curves and report where they stop.

# %%
starts = I.start_grid(tower, 4, 2)
curves = I.integrate_falling(tower, starts, max_len=1.0)
for cv in curves:
    print(f"start z={cv.z[0]:.4f}  end z={cv.terminal_z:.2e}  length={cv.length:.4f}  "
          f"monotone={cv.monotone()}  status={cv.status}")

# %%
delta, drops, _ = I.measure_delta(tower, starts)
print(f"minimal height drop per fundamental piece: {delta:.5f}")
print("length constant:", I.length_constant(tower, delta))
