"""Gas-to-USD cost computation, network profiles and throughput modeling.

USD cost is gas x gas price (gwei) x 1e-9 x token price. Display rounding
follows the reference table convention: three decimals below $0.01, two
otherwise, computed in decimal arithmetic so printed cents never suffer
binary float artifacts, and the 1,000-transaction monthly column is the
displayed per-transaction cost times the volume.

Rollup rows (Arbitrum, Optimism) are quoted as given per-transaction
costs, not derived from an L1 gas price. The throughput model is
transactions per minute = 60 / block interval x transactions per block;
note that 200 tx/min extrapolates to 288,000 per day, not the
sometimes-quoted 8,640 (which corresponds to 6 tx/min).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Mapping, Sequence

WORKFLOW_GAS = 751_000
POLYGON_GAS_FLOOR_GWEI = 25.0


@dataclass(frozen=True)
class NetworkProfile:
    name: str
    gas_price_gwei: float = 0.0
    token_usd: float = 0.0
    block_interval_s: float = 3.0
    txs_per_block: int = 10
    fixed_tx_usd: float | None = None  # rollups quote per-tx cost directly
    peak_gas_price_gwei: float | None = None
    note: str = ""

    def __post_init__(self) -> None:
        if self.block_interval_s <= 0 or self.txs_per_block <= 0:
            raise ValueError("block interval and txs per block must be positive")
        if self.gas_price_gwei < 0 or self.token_usd < 0:
            raise ValueError("gas price and token price cannot be negative")

    def to_json(self) -> dict:
        out = {
            "name": self.name,
            "gas_price_gwei": self.gas_price_gwei,
            "token_usd": self.token_usd,
            "block_interval_s": self.block_interval_s,
            "txs_per_block": self.txs_per_block,
        }
        if self.fixed_tx_usd is not None:
            out["fixed_tx_usd"] = self.fixed_tx_usd
        if self.peak_gas_price_gwei is not None:
            out["peak_gas_price_gwei"] = self.peak_gas_price_gwei
        if self.note:
            out["note"] = self.note
        return out

    @classmethod
    def from_json(cls, obj: Mapping) -> "NetworkProfile":
        return cls(
            name=str(obj["name"]),
            gas_price_gwei=float(obj.get("gas_price_gwei", 0.0)),
            token_usd=float(obj.get("token_usd", 0.0)),
            block_interval_s=float(obj.get("block_interval_s", 3.0)),
            txs_per_block=int(obj.get("txs_per_block", 10)),
            fixed_tx_usd=float(obj["fixed_tx_usd"]) if "fixed_tx_usd" in obj else None,
            peak_gas_price_gwei=float(obj["peak_gas_price_gwei"]) if "peak_gas_price_gwei" in obj else None,
            note=str(obj.get("note", "")),
        )


@dataclass(frozen=True)
class GasSnapshot:
    """One observed gas price point from a static snapshot file."""

    timestamp: str
    gas_price_gwei: float
    source: str = "snapshot"

    def __post_init__(self) -> None:
        if self.gas_price_gwei < 0:
            raise ValueError("gas price cannot be negative")


def usd_cost(gas: int, gas_price_gwei: float, token_usd: float) -> float:
    """gas x gwei x 1e-9 x token price, in USD."""
    if gas < 0 or gas_price_gwei < 0 or token_usd < 0:
        raise ValueError("inputs must be non-negative")
    return gas * gas_price_gwei * 1e-9 * token_usd


def usd_cost_decimal(gas: int, gas_price_gwei: float, token_usd: float) -> Decimal:
    """Same product in decimal arithmetic, for display rounding."""
    return (
        Decimal(gas)
        * Decimal(str(gas_price_gwei))
        * Decimal("1e-9")
        * Decimal(str(token_usd))
    )


def monthly_cost(per_tx_usd: float, volume: int) -> float:
    if volume < 0:
        raise ValueError("volume cannot be negative")
    return per_tx_usd * volume


def round_cost(value: Decimal) -> Decimal:
    """Three decimals below $0.01, two otherwise; half rounds away from zero."""
    if value == 0:
        return Decimal("0.00")
    places = Decimal("0.001") if abs(value) < Decimal("0.01") else Decimal("0.01")
    return value.quantize(places, rounding=ROUND_HALF_UP)


def format_usd(value: Decimal, *, trim: bool = False) -> str:
    text = f"{value:,f}"
    if trim and "." in text:
        text = text.rstrip("0").rstrip(".")
    return f"${text}"


@dataclass(frozen=True)
class CostRow:
    network: str
    gas: int
    typical_usd: Decimal | None
    peak_usd: Decimal | None
    monthly_1000_usd: Decimal
    note: str = ""

    def to_json(self) -> dict:
        return {
            "network": self.network,
            "gas": self.gas,
            "typical_usd": None if self.typical_usd is None else str(self.typical_usd),
            "peak_usd": None if self.peak_usd is None else str(self.peak_usd),
            "monthly_1000_usd": str(self.monthly_1000_usd),
            "note": self.note,
        }


@dataclass(frozen=True)
class CostTable:
    gas: int
    rows: tuple[CostRow, ...]

    def to_json(self) -> dict:
        return {"gas": self.gas, "rows": [r.to_json() for r in self.rows]}

    def to_markdown(self) -> str:
        lines = [
            f"# Transaction cost per {self.gas:,}-gas payment workflow",
            "",
            "| Network | Gas | Typical | Peak | 1000 tx/mo |",
            "|---|---|---|---|---|",
        ]
        for row in self.rows:
            typical = format_usd(row.typical_usd) if row.typical_usd is not None else "-"
            peak = format_usd(row.peak_usd) if row.peak_usd is not None else "-"
            monthly = format_usd(row.monthly_1000_usd, trim=True)
            lines.append(f"| {row.network} | {row.gas // 1000}K | {typical} | {peak} | {monthly} |")
        notes = [f"- {r.network}: {r.note}" for r in self.rows if r.note]
        if notes:
            lines.append("")
            lines.extend(notes)
        return "\n".join(lines) + "\n"

    def csv_rows(self) -> list[list[str]]:
        out = [["network", "gas", "typical_usd", "peak_usd", "monthly_1000_usd"]]
        for r in self.rows:
            out.append([
                r.network,
                str(r.gas),
                "" if r.typical_usd is None else str(r.typical_usd),
                "" if r.peak_usd is None else str(r.peak_usd),
                str(r.monthly_1000_usd),
            ])
        return out


def cost_table(profiles: Sequence[NetworkProfile], gas: int = WORKFLOW_GAS, volume: int = 1000) -> CostTable:
    """One row per profile; the monthly column uses the displayed per-tx cost."""
    if not profiles:
        raise ValueError("need at least one network profile")
    rows = []
    for profile in profiles:
        typical: Decimal | None
        peak: Decimal | None = None
        if profile.fixed_tx_usd is not None:
            typical = round_cost(Decimal(str(profile.fixed_tx_usd)))
        else:
            typical = round_cost(usd_cost_decimal(gas, profile.gas_price_gwei, profile.token_usd))
        if profile.peak_gas_price_gwei is not None:
            peak = round_cost(usd_cost_decimal(gas, profile.peak_gas_price_gwei, profile.token_usd))
            if profile.gas_price_gwei == 0:
                typical = None  # spike-only rows quote peak cost alone
        basis = typical if typical is not None else peak
        assert basis is not None
        monthly = (basis * volume).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)
        rows.append(CostRow(
            network=profile.name,
            gas=gas,
            typical_usd=typical,
            peak_usd=peak,
            monthly_1000_usd=monthly,
            note=profile.note,
        ))
    return CostTable(gas=gas, rows=tuple(rows))


@dataclass(frozen=True)
class ThroughputReport:
    tx_per_min: float
    daily_capacity: float

    def to_json(self) -> dict:
        return {"tx_per_min": self.tx_per_min, "daily_capacity": self.daily_capacity}


def throughput_model(profile: NetworkProfile) -> ThroughputReport:
    """tx/min = 60 / block interval x txs per block; daily = tx/min x 1440."""
    tx_per_min = 60.0 / profile.block_interval_s * profile.txs_per_block
    return ThroughputReport(tx_per_min=tx_per_min, daily_capacity=tx_per_min * 1440.0)


# Reference public-network profiles. The Ethereum row back-solves to
# 25 gwei x $3,000 (751K gas -> $56.33); rollup rows are given per-tx
# costs; Polygon rows are quoted at POL = $0.085 with the 25 gwei protocol
# floor and the Jan-2026 observed 1,519 gwei spike.
PAPER_PROFILES: tuple[NetworkProfile, ...] = (
    NetworkProfile(name="Ethereum L1", gas_price_gwei=25.0, token_usd=3000.0,
                   block_interval_s=12.0, txs_per_block=40),
    NetworkProfile(name="Arbitrum", fixed_tx_usd=0.56, block_interval_s=0.25, txs_per_block=1),
    NetworkProfile(name="Optimism", fixed_tx_usd=0.48, block_interval_s=2.0, txs_per_block=8),
    NetworkProfile(name="Polygon (30 gwei)", gas_price_gwei=30.0, token_usd=0.085,
                   block_interval_s=3.0, txs_per_block=10),
    NetworkProfile(name="Polygon (130 gwei)", gas_price_gwei=130.0, token_usd=0.085,
                   block_interval_s=3.0, txs_per_block=10),
    NetworkProfile(name="Polygon (spike)", gas_price_gwei=0.0, token_usd=0.085,
                   peak_gas_price_gwei=1519.0, block_interval_s=3.0, txs_per_block=10),
    NetworkProfile(name="Private Chain", gas_price_gwei=0.0, token_usd=0.0,
                   block_interval_s=1.0, txs_per_block=100, note="operational costs only"),
)


def load_profiles(path: str | Path) -> list[NetworkProfile]:
    """profiles.json: {"profiles": [NetworkProfile objects]}."""
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    return [NetworkProfile.from_json(p) for p in obj["profiles"]]


def save_profiles(profiles: Sequence[NetworkProfile], path: str | Path) -> Path:
    path = Path(path)
    path.write_text(
        json.dumps({"profiles": [p.to_json() for p in profiles]}, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    return path


def load_snapshots(path: str | Path) -> list[GasSnapshot]:
    """Static gas snapshot file: {"snapshots": [{timestamp, gas_price_gwei, source}]}."""
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    return [
        GasSnapshot(
            timestamp=str(s["timestamp"]),
            gas_price_gwei=float(s["gas_price_gwei"]),
            source=str(s.get("source", "snapshot")),
        )
        for s in obj["snapshots"]
    ]
