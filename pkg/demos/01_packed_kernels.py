"""Binary dot products with XNOR and popcount.

Two +/-1 vectors agree wherever their packed bits match, so the dot product
is (agreements) - (disagreements) = 2 * popcount(xnor) - n. This script packs
a few vectors, compares the kernel against plain float arithmetic, and then
runs a whole binary convolution through the packed path.
"""

import numpy as np

from bnn_ecg.bits import pack_bits, xnor_popcount_dot
from bnn_ecg.layers import Conv1d, conv1d, sign_binarize

rng = np.random.default_rng(0)

# A 100-element vector needs two 64-bit words; the tail of the second word
# is padding that the kernel masks out.
a = rng.choice([-1, 1], 100)
b = rng.choice([-1, 1], 100)
wa, wb = pack_bits(a), pack_bits(b)
print("words per row:", wa.size)
print("float dot:", int(a @ b), " packed dot:", xnor_popcount_dot(wa, wb, 100))

# A binary conv layer with +/-1 input. Zero padding is not a +/-1 value, so
# the packed path keeps a validity mask and gives the exact float result.
layer = Conv1d(8, 16, 7, 1, 3, binary=True, binary_input=True, rng=rng, dtype=np.float64)
x = rng.choice([-1.0, 1.0], size=(4, 8, 50))
ref, _ = conv1d(x, sign_binarize(layer.params["weight"]), 1, 3)
packed = layer.forward_packed(x)
print("conv output", packed.shape, "identical:", np.array_equal(ref, packed))
