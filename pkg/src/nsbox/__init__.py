"""Correlation measures, ribbons and wirings of bipartite no-signaling boxes."""
from .boxes import (
    BinaryBoxParams,
    BoxValidationError,
    NegativeEntry,
    NoSignalingBox,
    NotNormalized,
    Signaling,
    TSIRELSON_ETA,
    chsh_value,
    conditional_joint,
    deterministic_box,
    from_binary_params,
    isotropic,
    load_box,
    mix,
    product_box,
    save_box,
    to_binary_params,
    validate,
)
from .hc_ribbon import (
    HcStatus,
    HcVerdict,
    channel_objective,
    envelope_gap,
    hc_membership,
    hc_membership_box,
    hc_membership_channel,
    hc_membership_norms,
    norm_ratio,
    s_star,
    upsilon,
)
from .maxcorr import (
    BoxRho,
    RhoResult,
    joint_with_inputs,
    rho,
    rho_binary_closed_form,
    rho_box,
    rho_squared_variational,
    rho_value,
)
from .mc_ribbon import (
    McVerdict,
    RibbonPoint,
    form_value,
    mc_boundary_slice,
    mc_inf_ratio,
    mc_inf_ratio_box,
    mc_membership,
    mc_membership_box,
    perturbation_second_order,
)
from .prob import (
    JointDistribution,
    TableDistribution,
    conditional_expectation,
    entropy,
    mutual_information,
    variance_decomposition,
)
from .wiring import (
    PartyStrategy,
    TrajectoryJoint,
    WiringInstance,
    derived_box,
    execute,
    identity_wiring,
    load_wiring,
    random_instance,
    random_strategy,
    save_wiring,
    sequential_chain,
    verify_chain_rule_lemma,
    verify_structure_lemmas,
)

__version__ = "0.1.0"
