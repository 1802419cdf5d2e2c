from baselines.baselines import Provenance, make_baseline
from critic.compatible import assemble_gradient_thm1, fit_critic
from evaluation.exact import max_rel_err, solve_exact
from mdp.core import make_two_arm_bandit
from mdp.policy import zeros_policy
from util.logging import logger

HEALTHCHECK_TOL = 1e-8


def healthcheck() -> bool:
    """Check the critic-based gradient against the exact one on the bandit."""
    try:
        mdp = make_two_arm_bandit()
        policy = zeros_policy(mdp)
        exact = solve_exact(mdp, policy)
        baseline = make_baseline(Provenance.RANDOM_SEEDED, mdp, policy, exact, seed=0)
        critic = fit_critic(mdp, policy, exact, baseline)
        grad = assemble_gradient_thm1(mdp, policy, exact, critic, baseline)
        err = max_rel_err(grad, exact.grad_rho)
        if err > HEALTHCHECK_TOL:
            raise RuntimeError(f"identity error {err:.3g} above {HEALTHCHECK_TOL}")
        logger.info("Healthcheck passed.")
        return True
    except Exception as e:
        logger.error(f"Healthcheck failed: {e}")
        return False
