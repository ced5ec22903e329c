# %% [markdown]
# # Physical models: a Dicke cavity battery and a Heisenberg spin chain
#
# Dicke battery: n two-level systems share one cavity that starts with n
# photons. The best average power per cell grows roughly like the square
# root of n in the strong-coupling regime.

# %%
from qbattery.dicke import DickeConfig, dicke_power_ratio, fit_exponent

ns = [1, 2, 4, 6, 8]
ratios = dicke_power_ratio(ns, DickeConfig(1, lambda_bar=2.0))
for n, r in ratios:
    print(f"n={n}  power ratio={r:.4f}")
print("log-log exponent:", fit_exponent(ns, [r for _, r in ratios]))

# %% [markdown]
# Spin chain: weak interactions charged by a transverse drive. How the
# advantage grows with n depends on how many partners each spin couples to.

# %%
from qbattery.spinchain import ChainConfig, chain_advantage, scaling_study

table = scaling_study(["nearest_neighbour", "long_range", "uniform"], range(3, 9), ChainConfig(2))
for prof, fit in table.fits.items():
    print(f"{prof:18s} {fit.fit_class:12s} gammas={[round(g, 5) for g in table.gammas(prof)[1]]}")

# %% [markdown]
# Strong interactions freeze the spins and remove the advantage.

# %%
print([round(chain_advantage(ChainConfig(n, B=2.0, g=10.0)).gamma, 4) for n in range(3, 9)])
