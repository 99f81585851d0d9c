# %% [markdown]
# # How much does the high-cutoff epoch length matter?
#
# CIAO acts at most once per high epoch, so the epoch length sets how fast
# it can react. This sweeps it for CIAO-C on the LWS preset.

# %%
from ciaosim import Policy, default_config, gen_class, run

trace = gen_class("LWS", seed=0)
base = run(trace, default_config()).ipc
for high in (1000, 5000, 50000):
    s = run(trace, default_config(scheduler=Policy.CIAO_C, high_epoch_insts=high))
    acts = sum(1 for e in s.epochs if e[6] != "none")
    print(f"high_epoch={high:>6} ipc/gto={s.ipc / base:.3f} actions={acts}")

# %% [markdown]
# The same sweep with the IRS computed over the last high epoch only,
# instead of cumulatively since the start of the run.

# %%
for high in (1000, 5000, 50000):
    cfg = default_config(scheduler=Policy.CIAO_C, high_epoch_insts=high, irs_windowed=True)
    print(f"high_epoch={high:>6} windowed ipc/gto={run(trace, cfg).ipc / base:.3f}")
