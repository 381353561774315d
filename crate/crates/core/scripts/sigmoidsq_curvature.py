"""Independent check of the sigmoid-squared curvature constant.

g(z) = (1 - sigmoid(z))^2. Prints max |g''(z)| over z in [-20, 20], using
both the closed-form second derivative (sympy) and a dense grid.
"""

import numpy as np
import sympy as sp
from scipy.optimize import minimize_scalar

z = sp.symbols("z", real=True)
g = (1 - 1 / (1 + sp.exp(-z))) ** 2
g2 = sp.lambdify(z, sp.diff(g, z, 2), "numpy")

grid = np.linspace(-20.0, 20.0, 400_001)
vals = np.abs(g2(grid))
k = int(np.argmax(vals))
res = minimize_scalar(lambda t: -abs(g2(t)), bracket=(grid[k - 1], grid[k], grid[k + 1]))

print(f"grid max |g''| = {vals[k]:.10f} at z = {grid[k]:.5f}")
print(f"refined        = {-res.fun:.10f} at z = {res.x:.6f}")
