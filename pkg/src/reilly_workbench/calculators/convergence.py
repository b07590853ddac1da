"""
収束次数とRichardson外挿による三値判定

細分割レベル ℓ の h は ℓ+1 でおよそ半分になる（比 2）。
「violated」は外挿値が推定誤差の3倍を超えるときにしか出さない
"""

import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.reilly_workbench.errors import UsageError
from src.reilly_workbench.models.report_models import RichardsonEstimate, Verdict

logger = logging.getLogger(__name__)

REFINEMENT_RATIO = 2.0
MIN_ORDER = 0.8
# 外挿の次数推定を打ち切る範囲
ORDER_BOUNDS = (0.5, 6.0)
# violated と言うのに必要な（推定誤差に対する）倍率
SAFETY_FACTOR = 3.0
# これ以下の量からは次数を測らない
ORDER_FLOOR = 1e-13
# 最細レベルの量が許容値のこの割合以下なら次数の下限チェックを省く
ORDER_GATE_FRACTION = 1e-2


def observed_orders(
    values: Sequence[float],
    h: Optional[Sequence[float]] = None,
    floor: float = ORDER_FLOOR,
) -> List[Optional[float]]:
    """
    0 に収束すべき量の隣接レベル間の観測次数

    log(|e_ℓ|/|e_{ℓ+1}|) / log(h_ℓ/h_{ℓ+1})。h を省略すると比 2 を仮定する。
    どちらかが floor 以下（丸め誤差の水準）のときは None
    """
    values = [abs(float(v)) for v in values]
    orders: List[Optional[float]] = []
    for k in range(len(values) - 1):
        ratio = REFINEMENT_RATIO if h is None else float(h[k]) / float(h[k + 1])
        if values[k] <= floor or values[k + 1] <= floor or ratio <= 1.0:
            orders.append(None)
            continue
        orders.append(math.log(values[k] / values[k + 1]) / math.log(ratio))
    return orders


def richardson_extrapolate(values: Sequence[float], ratio: float = REFINEMENT_RATIO) -> RichardsonEstimate:
    """
    最後の3水準からの外挿値と誤差推定

    次数 p = log(|Q1−Q2|/|Q2−Q3|)/log(ratio) を ORDER_BOUNDS に収め、
    Q∞ = Q3 + (Q3−Q2)/(ratio^p − 1)。差分の符号が振動する場合や
    差分が丸め誤差程度の場合は外挿せず、差分の大きさを誤差とする

    Raises:
        UsageError: 値が一つもない場合
    """
    samples = [float(v) for v in values]
    if not samples:
        raise UsageError("Richardson extrapolation needs at least one value")
    if len(samples) == 1:
        return RichardsonEstimate(value=samples[0], error_estimate=math.inf, order=None, samples=samples)
    if len(samples) == 2:
        return RichardsonEstimate(
            value=samples[1],
            error_estimate=abs(samples[1] - samples[0]),
            order=None,
            samples=samples,
        )

    q1, q2, q3 = samples[-3:]
    d1, d2 = q2 - q1, q3 - q2
    roundoff = 64.0 * np.finfo(float).eps * max(abs(q1), abs(q2), abs(q3), 1e-300)
    if abs(d1) <= roundoff or abs(d2) <= roundoff:
        return RichardsonEstimate(
            value=q3, error_estimate=max(abs(d2), roundoff), order=None, samples=samples
        )
    if d1 * d2 < 0.0:
        logger.debug(f"Oscillating sequence {samples[-3:]}, skipping extrapolation")
        return RichardsonEstimate(
            value=q3, error_estimate=max(abs(d1), abs(d2)), order=None, samples=samples
        )

    order = math.log(abs(d1) / abs(d2)) / math.log(ratio)
    order = min(max(order, ORDER_BOUNDS[0]), ORDER_BOUNDS[1])
    value = q3 + d2 / (ratio**order - 1.0)
    return RichardsonEstimate(
        value=value, error_estimate=abs(value - q3), order=order, samples=samples
    )


def vanishing_verdict(estimate: RichardsonEstimate, tolerance: float) -> Verdict:
    """0 になるべき量（残差・相対ギャップ・不一致）の判定"""
    magnitude = abs(estimate.value)
    if magnitude <= tolerance:
        return Verdict.HOLDS
    if magnitude > max(tolerance, SAFETY_FACTOR * estimate.error_estimate):
        return Verdict.VIOLATED
    return Verdict.INCONCLUSIVE


def inequality_verdict(estimate: RichardsonEstimate, tolerance: float) -> Tuple[Verdict, bool]:
    """
    非負になるべき量（ギャップ・スラック）の判定

    Returns:
        (verdict, strict): strict は外挿値が誤差の3倍と tolerance を
        ともに超えて正であること
    """
    value = estimate.value
    margin = SAFETY_FACTOR * estimate.error_estimate
    if value > margin and value > tolerance:
        return Verdict.HOLDS, True
    if abs(value) <= tolerance:
        return Verdict.HOLDS, False
    if value < -max(tolerance, margin):
        return Verdict.VIOLATED, False
    return Verdict.INCONCLUSIVE, False


def order_satisfied(orders: Sequence[Optional[float]], min_order: float = MIN_ORDER) -> bool:
    """最後に観測できた次数が min_order 以上か（観測できなければ True）"""
    observed = [o for o in orders if o is not None]
    if not observed:
        return True
    return observed[-1] >= min_order


def order_gate_applies(values: Sequence[float], tolerance: float, fraction: float = ORDER_GATE_FRACTION) -> bool:
    """
    次数の下限チェックを行うか

    最細レベルの量が tolerance·fraction 以下なら、次数は離散化誤差でなく
    丸めや求積の揺らぎで決まるので判定に使わない
    """
    if not values:
        return False
    return abs(float(values[-1])) > fraction * tolerance
