"""Regenerates the frozen numeric expectations used by test_nn.py.

Run `python3 tests/oracles/nn_oracle.py` and paste the printed literals.
Everything here is computed with mpmath at 60 significant digits, completely
independent of the package's float64 kernel.
"""

import mpmath as mp

mp.mp.dps = 60

# --- pinned 3-4-2 MLP forward (ReLU hidden, linear out) ---------------------
# Weights chosen by hand so one hidden unit lands negative (exercises ReLU).
W0 = [[0.5, -1.0, 0.25, 2.0],
      [1.5, 0.5, -0.75, -0.5],
      [-2.0, 1.0, 0.5, 1.0]]
B0 = [0.1, -0.3, 0.3, 0.0]
W1 = [[1.0, -1.0],
      [0.5, 0.25],
      [-0.5, 2.0],
      [2.0, 0.125]]
B1 = [0.05, -0.05]
X = [0.2, -0.4, 0.6]

h = []
for j in range(4):
    z = mp.mpf(B0[j])
    for i in range(3):
        z += mp.mpf(W0[i][j]) * mp.mpf(X[i])
    h.append(max(z, mp.mpf(0)))
out = []
for k in range(2):
    z = mp.mpf(B1[k])
    for j in range(4):
        z += mp.mpf(W1[j][k]) * h[j]
    out.append(z)
print("hidden pre-relu:", [mp.nstr(mp.mpf(B0[j]) + sum(mp.mpf(W0[i][j]) * mp.mpf(X[i]) for i in range(3)), 20) for j in range(4)])
print("FORWARD_342 =", [mp.nstr(v, 20) for v in out])

# --- softmax([1, 0]) and its entropy ----------------------------------------
e = mp.e
p0 = e / (1 + e)
p1 = 1 / (1 + e)
H = -(p0 * mp.log(p0) + p1 * mp.log(p1))
print("SOFTMAX_10 =", mp.nstr(p0, 20), mp.nstr(p1, 20))
print("ENTROPY_SOFTMAX_10 =", mp.nstr(H, 20))

# --- two Adam steps on a scalar ---------------------------------------------
# lr=0.1, betas (0.9, 0.999), eps 1e-8; grads 1.0 then 0.5; start x=0.
lr, b1, b2, eps = map(mp.mpf, ("0.1", "0.9", "0.999", "1e-8"))
x = mp.mpf(0)
m = v = mp.mpf(0)
for t, g in enumerate([mp.mpf(1), mp.mpf("0.5")], start=1):
    m = b1 * m + (1 - b1) * g
    v = b2 * v + (1 - b2) * g * g
    mhat = m / (1 - b1 ** t)
    vhat = v / (1 - b2 ** t)
    x -= lr * mhat / (mp.sqrt(vhat) + eps)
    print(f"ADAM_STEP_{t} =", mp.nstr(x, 20))
