"""Pruning an INR on a sub-box of its domain.

Restricted to a small box, a network usually needs far fewer hidden neurons.
Each hidden layer's activation matrix on sample points is decomposed, rows of the
layer are dropped and the next layer absorbs the interpolation matrix.
"""
import numpy as np

from inrmesh import DomainBox, LayerSpec, Mlp, MeshTree, prune_on_element
from inrmesh.mesh import sample_uniform

rng = np.random.default_rng(1)
W1 = rng.standard_normal((32, 2)) * 6
W2 = rng.standard_normal((32, 32)) / 4
net = Mlp(
    (LayerSpec(W1, rng.uniform(-3, 3, 32), "tanh"),
     LayerSpec(W2, rng.uniform(-1, 1, 32), "tanh"),
     LayerSpec(rng.standard_normal((1, 32)), [0.0], "identity")),
    DomainBox([0, 0], [1, 1]),
)
print("full network:", net.hidden_widths, "hidden neurons")

mesh = MeshTree(net.domain)
mesh.refine_uniform(3)
for element in (mesh.root, mesh.leaves[0], mesh.leaves[-1]):
    for eps in (1e-2, 1e-6):
        pruned, sizes = prune_on_element(net, element, eps, 64, seed=0)
        X = sample_uniform(element, 500, 0, "err")
        dev = np.max(np.abs(pruned(X) - net(X))) / np.max(np.abs(net(X)))
        print(f"level {element.level} box {element.lo.round(3)}..{element.hi.round(3)} eps={eps:.0e}: "
              f"widths {list(sizes)}, max relative deviation {dev:.1e}")
