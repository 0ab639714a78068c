# %% [markdown]
# # The stable bundle switches between fibers
#
# Build the cat-map tower on T^3: a shear profile `h` on the height
# coordinate and a base map sheared along its stable direction.  On the
# floor `z = 0` the height contracts at rate `lambda = 0.25`, faster than
# the cat map's stable rate 0.382, so the strongest contraction is vertical.
# On the roof `z = 1` the height expands at rate `mu = 1.8` and the
# strongest contraction is the base stable direction.

# %%
import numpy as np

from skewswitch.base_systems import make_linear_anosov
from skewswitch.profiles import build_profile
from skewswitch.skew_product import build_tower
from skewswitch import splitting as S

cat = make_linear_anosov([[2, 1], [1, 1]], 1)
prof = build_profile(0.25, 0.4, 1.8, 0.9)
tower = build_tower(cat, prof, epsilon=0.05)
print("profile constants:", prof.constants())

# %% [markdown]
# Estimate the stable, center and unstable bundles along one column of
# heights over a fixed base point.  Print the vertical component of each
# unit vector: 1 means vertical, 0 means horizontal.

# %%
z = np.linspace(0.0, 1.0, 11)
pts = np.column_stack([np.full_like(z, 0.3), np.full_like(z, 0.7), z])
est = S.estimate_splitting(tower, pts, 60)
print("   z     |s_z|   |c_z|   |u_z|")
for zi, s, c, u in zip(z, est.s[:, 2, 0], est.c[:, 2, 0], est.u[:, 2, 0]):
    print(f"{zi:5.2f}  {abs(s):6.3f}  {abs(c):6.3f}  {abs(u):6.3f}")

# %% [markdown]
# Lyapunov exponents on the floor are known in closed form: the vertical
# one is `log lambda`, the horizontal ones are the cat map's.

# %%
rep = S.lyapunov_qr(tower, [0.3, 0.7, 0.0], 10_000)
target = np.sort(np.log([0.25, (3 - 5**0.5) / 2, (3 + 5**0.5) / 2]))
print("measured:", np.round(rep.exponents, 5))
print("target:  ", np.round(target, 5))
