"""
Parallel Kalman filter and RTS smoother on a linear model
=========================================================

For an affine-Gaussian model the scan-based filter/smoother and the classical
recursions must agree. We simulate a constant-velocity model and compare.
"""
# %%
import numpy as np

from parsmooth import Gaussian, kf_forward, linear_gaussian_model, parallel_filter, parallel_smooth, rts_backward, simulate
from parsmooth.linearize import NominalTrajectory, taylor_linearize

dt = 0.1
F = np.array([[1, 0, dt, 0], [0, 1, 0, dt], [0, 0, 1, 0], [0, 0, 0, 1.0]])
H = np.array([[1, 0, 0, 0], [0, 1, 0, 0.0]])
Q = 0.01 * np.diag([dt**3 / 3, dt**3 / 3, dt, dt])
model = linear_gaussian_model(F, np.zeros(4), H, np.zeros(2), Q, 0.05 * np.eye(2), np.zeros(4), np.eye(4))

traj = simulate(model, 500, seed=0)

# %%
# Linearising an affine model is exact, so any nominal trajectory will do.
lin = taylor_linearize(model, NominalTrajectory(np.zeros((501, 4))))
prior = Gaussian(model.prior_mean, model.prior_cov)
args = (lin, traj.measurements, model.prior_mean, model.prior_cov, model.process_noise_cov, model.measurement_noise_cov)

seq_f = kf_forward(*args)
seq_s = rts_backward(seq_f, lin, model.process_noise_cov, prior=prior)
par_f = parallel_filter(*args)
par_s = parallel_smooth(par_f, lin, model.process_noise_cov, prior=prior)

print("max |filter mean diff|  ", np.abs(seq_f.mean - par_f.mean).max())
print("max |smoother mean diff|", np.abs(seq_s.mean - par_s.mean).max())

# %%
rmse = lambda m: np.sqrt(np.mean(np.sum((m[:, :2] - traj.states[1:, :2]) ** 2, axis=1)))  # noqa: E731
print(f"position RMSE: filtered {rmse(par_f.mean):.4f}, smoothed {rmse(par_s.mean[1:]):.4f}")
