"""Chain two PR boxes and look at what comes out.

The second box is fed the first box's outputs. The derived box loses CHSH
value but keeps rho = 1 at inputs (1, 1): wiring never increases rho, and
here it does not decrease it either.

Run: python3 demos/pr_chain.py
"""
from nsbox import (
    chsh_value,
    derived_box,
    isotropic,
    rho_box,
    sequential_chain,
    verify_chain_rule_lemma,
    verify_structure_lemmas,
)

inst = sequential_chain([isotropic(1.0), isotropic(1.0)])
box = derived_box(inst)
r = rho_box(box)
print(f"derived CHSH = {chsh_value(box):.4f}")
print(f"derived rho  = {r.rho:.4f} at inputs {r.argmax_input_pair}")
print("per-input rho:\n", r.per_input)

for xp in range(2):
    for yp in range(2):
        s = verify_structure_lemmas(inst, xp, yp).max_residual
        c = verify_chain_rule_lemma(inst, xp, yp).max_residual
        print(f"(x', y') = ({xp}, {yp}): structure residual {s:.1e}, chain-rule residual {c:.1e}")
