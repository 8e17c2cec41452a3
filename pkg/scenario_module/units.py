# scenario_module/units.py
# The only place unit conversion constants live. Everything downstream of
# load_scenario works in SI; unit helpers convert at the edges.

S_PER_MIN = 60.0
S_PER_H = 3600.0
M_PER_KM = 1000.0
KMH_PER_MS = 3.6
GWEI_PER_ETHER = 1e9

# Document unit suffixes per quantity kind. The first entry of each table is the
# SI suffix that dump_scenario writes.
DURATION_UNITS = {"_s": 1.0, "_min": S_PER_MIN, "_h": S_PER_H}
DISTANCE_UNITS = {"_m": 1.0, "_km": M_PER_KM}
SPEED_UNITS = {"_ms": 1.0, "_kmh": 1.0 / KMH_PER_MS}
RATE_UNITS = {"_bps": 1.0, "_mbps": 1e6}
BITS_UNITS = {"_bits": 1.0, "_bytes": 8.0}
POWER_UNITS = {"_W": 1.0, "_kW": 1e3}

UNIT_TABLES = {
    "duration": DURATION_UNITS,
    "distance": DISTANCE_UNITS,
    "speed": SPEED_UNITS,
    "rate": RATE_UNITS,
    "bits": BITS_UNITS,
    "power": POWER_UNITS,
}


def kmh_to_ms(speed_kmh):
    return speed_kmh / KMH_PER_MS


def ms_to_kmh(speed_ms):
    return speed_ms * KMH_PER_MS


def m_to_km(distance_m):
    return distance_m / M_PER_KM


def s_to_h(duration_s):
    return duration_s / S_PER_H


def gas_to_ether(gas, gas_price_gwei):
    return gas * gas_price_gwei / GWEI_PER_ETHER
