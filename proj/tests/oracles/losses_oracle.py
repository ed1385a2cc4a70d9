"""Hand-evaluated loss values used in test_temporal.cpp and test_spatial.cpp."""
import math

print("discriminator_loss(0.9, 0.8) =", repr(-math.log(1 - 0.9) - math.log(0.8)))
print("discriminator_loss(0.5, 0.5) =", repr(2 * math.log(2)))
print("generator_loss(diff 0.1, p 0.5, lambda 1e-3) =", repr(0.1 ** 2 + 1e-3 * math.log(2)))
print("bce 2x2 =", repr(-math.log(0.8) - math.log(0.7) - math.log(0.6) - math.log(0.9)))
