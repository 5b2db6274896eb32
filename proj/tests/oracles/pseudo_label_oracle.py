"""Hand evaluation of the confidence-gap correction for the frozen test vectors."""
import math

p_local = [0.97, 0.02, 0.01]
p_global = [0.10, 0.85, 0.05]
kappa = 13.86

gap = abs(max(p_local) - max(p_global))
lam = math.exp(-kappa * gap)
target = [0.0] * 3
target[p_local.index(max(p_local))] += lam
target[p_global.index(max(p_global))] += 1.0 - lam
print(f"gap={gap:.12f} lambda={lam:.12f} target={[round(t, 12) for t in target]}")

# kappa heuristic: exp(-kappa * 0.05) = 0.5
print(f"kappa_star={math.log(2) / 0.05:.12f} lambda(0.05, 13.86)={math.exp(-13.86 * 0.05):.12f}")

# limit check: kappa=1e6, gap 0.12 -> local weight
print(f"lambda(kappa=1e6, gap=0.12)={math.exp(-1e6 * 0.12)!r}")
