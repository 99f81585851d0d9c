# %% [markdown]
# # Policies on the three workload classes
#
# IPC of every scheduler on seed 0 of the LWS, SWS and CI presets,
# normalised to GTO. Best-SWL runs with a limit of 24 warps.

# %%
from ciaosim import Policy, default_config, gen_class, run

POLICIES = [Policy.GTO, Policy.BEST_SWL, Policy.CCWS_LITE,
            Policy.CIAO_T, Policy.CIAO_P, Policy.CIAO_C]

rows = {}
for cls in ("LWS", "SWS", "CI"):
    trace = gen_class(cls, seed=0)
    stats = {p: run(trace, default_config(scheduler=p, best_swl_limit=24)) for p in POLICIES}
    base = stats[Policy.GTO].ipc
    rows[cls] = {p.value: s.ipc / base for p, s in stats.items()}

# %%
print(f"{'class':6}" + "".join(f"{p.value:>11}" for p in POLICIES))
for cls, r in rows.items():
    print(f"{cls:6}" + "".join(f"{r[p.value]:>11.3f}" for p in POLICIES))

# %% [markdown]
# CIAO-P and CIAO-C lead on both memory-bound classes, and nobody moves
# the compute-bound one. CIAO-T trails GTO: at most one warp is stalled per
# high epoch, which costs issue slots without shrinking the working set of
# the other 47 warps enough to pay for them.
#
# Timeline of warp states under CIAO-C on the LWS preset: how many warps
# are active, isolated and stalled every 1000 cycles.

# %%
s = run(gen_class("LWS", seed=0), default_config(scheduler=Policy.CIAO_C))
for cycle, a, i, st in s.timeline[::20]:
    print(f"{cycle:>8} active={a:2} isolated={i:2} stalled={st:2}")
