"""Reference proposal programs.

``boundary_reference`` is a 20-operation implementation of the classic
boundary-walk proposal: take an orthogonal step of size delta*d from the
current adversarial example along the noise direction, project the result
back onto the sphere of radius d around the original example, then contract
toward the original by a factor (1 - epsilon).  Two hyperparameters: s0 is
the contraction step epsilon, s1 the orthogonal step scale delta.

It satisfies the closer-than-best inequality by construction:
||x' - x0|| = (1 - s0) * d < d for s0 in (0, 1).
"""

from __future__ import annotations

from .generate import GenConfig, ProgramBuilder, emit_predefined
from .ops import Op
from .program import SsaProgram

__all__ = ["boundary_reference", "noise_step_reference"]


def boundary_reference(epsilon: float = 0.01, delta: float = 0.1) -> SsaProgram:
    cfg = GenConfig(max_len=20, n_hyperparams=2, hyperparam_init=epsilon)
    b = ProgramBuilder(cfg)
    s_eps, s_delta = 0, 1
    i_x0, i_x, i_n = b.input_indices
    emit_predefined(b)  # v = x0 - x; d = ||v||; u = v / d
    v, d, u = i_n + 1, i_n + 2, i_n + 3
    nn = b.append(Op.NORM_V, (i_n,))
    n_hat = b.append(Op.DIV_VS, (i_n, nn))
    along = b.append(Op.DOT_VV, (n_hat, u))
    par = b.append(Op.MUL_VS, (u, along))
    orth = b.append(Op.SUB_VV, (n_hat, par))
    orth_norm = b.append(Op.NORM_V, (orth,))
    orth_hat = b.append(Op.DIV_VS, (orth, orth_norm))
    step = b.append(Op.MUL_SS, (d, s_delta))
    orth_step = b.append(Op.MUL_VS, (orth_hat, step))
    y = b.append(Op.ADD_VV, (i_x, orth_step))
    y_off = b.append(Op.SUB_VV, (y, i_x0))
    y_dist = b.append(Op.NORM_V, (y_off,))
    y_dir = b.append(Op.DIV_VS, (y_off, y_dist))
    eps_d = b.append(Op.MUL_SS, (d, s_eps))
    new_d = b.append(Op.SUB_SS, (d, eps_d))
    contracted = b.append(Op.MUL_VS, (y_dir, new_d))
    b.append(Op.ADD_VV, (i_x0, contracted))
    p = b.finish()
    # distinct initial values for the two hyperparameters
    return SsaProgram(
        hyperparams=(p.hyperparams[0], (p.hyperparams[1][0], delta)),
        inputs=p.inputs,
        body=p.body,
        return_id=p.return_id,
    )


def noise_step_reference(scale: float = 0.01) -> SsaProgram:
    """Minimal survivor-shaped program: contract toward x0 and add scaled noise.

    x' = x0 + (1 - s0) * (x - x0) + s0 * d * n / ||n||, renormalized to stay
    strictly inside the current distance.  Used as a small test fixture.
    """
    cfg = GenConfig(max_len=12, n_hyperparams=1, hyperparam_init=scale)
    b = ProgramBuilder(cfg)
    s0 = 0
    i_x0, i_x, i_n = b.input_indices
    emit_predefined(b)
    v, d, u = i_n + 1, i_n + 2, i_n + 3
    nn = b.append(Op.NORM_V, (i_n,))
    n_hat = b.append(Op.DIV_VS, (i_n, nn))
    noise_amt = b.append(Op.MUL_SS, (d, s0))
    noise_vec = b.append(Op.MUL_VS, (n_hat, noise_amt))
    towards = b.append(Op.MUL_VS, (u, noise_amt))  # step of length s0*d toward x0
    stepped = b.append(Op.ADD_VV, (i_x, towards))
    jittered = b.append(Op.ADD_VV, (stepped, noise_vec))
    off = b.append(Op.SUB_VV, (jittered, i_x0))
    b.append(Op.ADD_VV, (i_x0, off))
    return b.finish()
