#!/usr/bin/env python3
"""Regenerates the seed fixture CSVs under crates/core/seed/.

The room roster is synthetic apart from the named example rooms. Equipment
counts per category follow the case-study inventory.
"""
import csv
import json
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "crates" / "core" / "seed"

HVAC = "23-33 00 00 HVAC"
ELEC = "23-04 50 Electrical"
PLUMB = "23-37 00 00 Plumbing"
COMM = "23-39 00 00 Communication"
CONV = "23-41 00 00 Conveying"

# category -> (system, type, discipline, om_properties)
CATEGORIES = {
    "AHU": (HVAC, "23-33 13 00 Air Handling Units", "mechanical",
            {"manufacturer": "Trane", "phases": 3, "capacity": {"value": 12000, "unit": "cfm"}}),
    "ERU": (HVAC, "23-33 13 13 Energy Recovery Units", "mechanical",
            {"manufacturer": "Greenheck", "phases": 3, "capacity": {"value": 4000, "unit": "cfm"}}),
    "VAV": (HVAC, "23-33 17 00 Variable Air Volume Units", "mechanical",
            {"manufacturer": "Price", "capacity": {"value": 800, "unit": "cfm"}}),
    "hot water pumps": (HVAC, "23-33 21 00 Hot Water Pumps", "mechanical",
                        {"manufacturer": "Bell & Gossett", "phases": 3, "consumption": {"value": 5.6, "unit": "kW"}}),
    "CO sensors": (HVAC, "23-33 45 11 Carbon Monoxide Sensors", "mechanical", {"manufacturer": "Honeywell"}),
    "temperature sensors": (HVAC, "23-33 45 13 Temperature Sensors", "mechanical", {"manufacturer": "Aosong"}),
    "humidity sensors": (HVAC, "23-33 45 15 Humidity Sensors", "mechanical", {"manufacturer": "Bosch"}),
    "generator": (ELEC, "23-35 13 00 Generators", "electrical",
                  {"manufacturer": "Caterpillar", "phases": 3, "capacity": {"value": 500, "unit": "kW"}}),
    "transformers": (ELEC, "23-35 21 00 Transformers", "electrical",
                     {"manufacturer": "Eaton", "phases": 3, "capacity": {"value": 225, "unit": "kVA"}}),
    "lighting fixtures": (ELEC, "23-35 47 00 Electrical Lighting", "electrical",
                          {"manufacturer": "Lithonia", "consumption": {"value": 40, "unit": "W"}}),
    "faucets": (PLUMB, "23-37 11 13 Faucets", "plumbing", {"manufacturer": "Sloan", "consumption": {"value": 0.5, "unit": "gpm"}}),
    "sinks": (PLUMB, "23-37 11 15 Lavatories and Sinks", "plumbing", {"manufacturer": "Kohler"}),
    "service sinks": (PLUMB, "23-37 11 17 Service Sinks", "plumbing", {"manufacturer": "Zurn"}),
    "toilets": (PLUMB, "23-37 11 21 Water Closets", "plumbing",
                {"manufacturer": "Kohler", "consumption": {"value": 1.28, "unit": "gpf"}}),
    "urinals": (PLUMB, "23-37 11 23 Urinals", "plumbing", {"manufacturer": "Sloan", "consumption": {"value": 0.125, "unit": "gpf"}}),
    "water heaters": (PLUMB, "23-37 13 00 Water Heaters", "plumbing",
                      {"manufacturer": "A. O. Smith", "phases": 1, "capacity": {"value": 50, "unit": "gal"}}),
    "drinking fountains": (PLUMB, "23-37 15 00 Drinking Fountains", "plumbing", {"manufacturer": "Elkay", "filter": "WaterSentry"}),
    "occupancy sensors": (COMM, "23-39 21 00 Occupancy Sensors", "communication", {"manufacturer": "Acuity nLight"}),
    "elevators": (CONV, "23-41 11 00 Elevators", "conveying",
                  {"manufacturer": "Otis", "capacity": {"value": 3500, "unit": "lb"}}),
}

PANEL = (ELEC, "23-35 23 00 Panel Boards", "electrical",
         {"manufacturer": "Square D", "phases": 3, "dashboard_support": True})

OFFICE = "13-55 11 00 Office Spaces"
RESTROOM = "13-23 17 00 Restroom"
BREAK = "13-57 17 13 Break Room"


def spaces():
    rows = [
        ("13-71 11 11 Mechanical Equipment Room", "Mechanical Room", "Mechanical Room B01", "B"),
        ("13-71 11 13 Electrical Equipment Room", "Electrical Room", "Electrical Room B02", "B"),
        ("13-71 11 15 Generator Room", "Generator Room", "Generator Room B03", "B"),
        ("13-67 11 00 Storage Spaces", "Storage", "Storage B04", "B"),
    ]
    for f in range(1, 5):
        for n in range(1, 13):
            tag = f"Room {f}{n:02d}"
            name = "Main Study Area" if tag == "Room 101" else f"Study Room {f}{n:02d}"
            rows.append((OFFICE, name, tag, str(f)))
        a = "Restroom A" if f == 1 else f"Restroom {f}A"
        b = "Restroom B" if f == 1 else f"Restroom {f}B"
        rows.append((RESTROOM, "Men's RRs", a, str(f)))
        rows.append((RESTROOM, "Women's RRs", b, str(f)))
        rows.append(("13-71 13 00 Custodial Spaces", "Janitor Closet", f"Janitor {f}", str(f)))
        rows.append((BREAK, "Break Room", f"Break Room {f}", str(f)))
        rows.append(("13-65 11 00 Lobbies", "Elevator Lobby", f"Elevator Lobby {f}", str(f)))
        rows.append(("13-65 13 00 Corridors", "Corridor", f"Corridor {f}", str(f)))
    rows.append(("13-71 11 11 Mechanical Equipment Room", "Mechanical Room", "Mechanical Room 401", "4"))
    return rows


def restrooms(f):
    return ("Restroom A", "Restroom B") if f == 1 else (f"Restroom {f}A", f"Restroom {f}B")


def rooms(f, n):
    return [f"Room {f}{k:02d}" for k in range(1, n + 1)]


def equipment():
    out = []

    def add(cat, space, n=1):
        out.extend([(cat, space)] * n)

    add("AHU", "Mechanical Room B01", 2)
    add("AHU", "Mechanical Room 401")
    add("ERU", "Mechanical Room 401")
    add("VAV", "Room 101")
    add("hot water pumps", "Mechanical Room B01", 2)
    add("generator", "Generator Room B03")
    add("transformers", "Electrical Room B02", 2)
    for f in range(1, 5):
        for r in rooms(f, 12):
            add("lighting fixtures", r, 5)
        add("lighting fixtures", f"Corridor {f}", 9)
        add("lighting fixtures", f"Break Room {f}", 3)
        add("lighting fixtures", f"Elevator Lobby {f}", 3)
        for r in rooms(f, 7):
            add("temperature sensors", r)
        for r in rooms(f, 5):
            add("humidity sensors", r)
        for r in rooms(f, 4):
            add("CO sensors", r)
        for r in rooms(f, 12) + [f"Elevator Lobby {f}", f"Break Room {f}", f"Corridor {f}"]:
            add("occupancy sensors", r)
        men, women = restrooms(f)
        for rr in (men, women):
            add("faucets", rr, 2)
            add("sinks", rr, 2)
            add("toilets", rr, 2)
        add("urinals", men, 2)
        add("service sinks", f"Janitor {f}")
        add("water heaters", f"Janitor {f}", 2)
    add("temperature sensors", "Mechanical Room B01")
    add("temperature sensors", "Electrical Room B02")
    for tag in ("Mechanical Room B01", "Electrical Room B02", "Generator Room B03", "Storage B04"):
        add("CO sensors", tag)
    add("drinking fountains", "Elevator Lobby 1")
    add("drinking fountains", "Elevator Lobby 3")
    add("elevators", "Elevator Lobby 1", 2)
    return out


# (category, kind, dashboard_support, live_capable, interval_s, low, high, baseline, amplitude, sigma)
SENSORS = [
    ("temperature sensors", "temperature", False, False, "", "", "", "", "", ""),
    ("humidity sensors", "humidity", False, False, "", "", "", "", "", ""),
    ("CO sensors", "co", False, False, "", "", "", "", "", ""),
    ("occupancy sensors", "occupancy", False, True, "", "", "", "", "", ""),
    ("AHU", "temperature", True, False, "", 50, 60, 55, 1, 0.5),
    ("AHU", "humidity", True, False, "", "", "", "", "", ""),
    ("AHU", "flow_rate", True, False, "", 0, 40, 25, 5, 1),
    ("hot water pumps", "pressure", True, False, "", "", "", "", "", ""),
    ("hot water pumps", "flow_rate", True, False, "", "", "", "", "", ""),
    ("drinking fountains", "flow_rate", True, False, "", 0, 2, 0.5, 0.25, 0.0625),
    ("generator", "runtime", True, False, "", "", "", "", "", ""),
    ("generator", "fuel_level", True, False, "", "", "", "", "", ""),
    ("generator", "load", True, False, "", "", "", "", "", ""),
    ("transformers", "voltage", True, False, "", "", "", "", "", ""),
    ("transformers", "amperage", True, False, "", "", "", "", "", ""),
    ("transformers", "power", True, False, "", 0, 200, 90, 30, 5),
    ("lighting fixtures", "power", True, False, "", "", "", "", "", ""),
    ("toilets", "flow_rate", True, False, "", 0, 5, 1.5, 0.75, 0.25),
    ("urinals", "flow_rate", True, False, "", 0, 2, 0.5, 0.25, 0.125),
    ("elevators", "runtime", True, False, "", "", "", "", "", ""),
    ("elevators", "load", True, False, "", "", "", "", "", ""),
]

# (category, kind, low, high, raise_debounce, clear_debounce)
RULES = [
    ("temperature sensors", "temperature", 68, 76, 1, 3),
    ("humidity sensors", "humidity", 30, 60, 1, 3),
    ("CO sensors", "co", 0, 9, 1, 3),
    ("occupancy sensors", "occupancy", 0, 1, 1, 3),
    ("AHU", "temperature", 50, 60, 2, 3),
]

POLICIES = [
    ("PM-001", "equipment_type", CATEGORIES["generator"][1], "check fuel|run load test", 30, "2024-01-01", "oil filter:1"),
    ("PM-002", "equipment_type", CATEGORIES["AHU"][1], "replace filters|inspect belts", 90, "2024-01-01", "filter set:4"),
    ("PM-003", "room", "Restroom A", "clean fixtures|restock supplies", 1, "2024-01-01", "paper towels:2"),
    ("PM-004", "equipment_type", CATEGORIES["elevators"][1], "inspect doors|lubricate rails", 30, "2024-01-15", ""),
    ("PM-005", "equipment_type", CATEGORIES["water heaters"][1], "flush tank|check anode", 180, "2024-02-01", "anode rod:1"),
    ("PM-006", "equipment_type", CATEGORIES["hot water pumps"][1], "check seals|verify pressure", 60, "2024-01-01", ""),
    ("PM-007", "equipment_type", CATEGORIES["transformers"][1], "infrared scan", 365, "2024-03-01", ""),
    ("PM-008", "room", "Break Room 1", "clean surfaces|empty bins", 1, "2024-01-01", "trash liners:2"),
]


def number(code):
    parts = code.split(" ")
    groups = [parts[0]] + [p for p in parts[1:] if p.isdigit() and len(p) == 2]
    return " ".join(groups)


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    space_rows = spaces()
    with open(OUT / "spaces.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["Room-Category", "Room-Name", "Room-Tag", "Room-AugmentID", "floor_level"])
        for cat, name, tag, floor in space_rows:
            w.writerow([cat, name, tag, "", floor])

    items = equipment()
    with open(OUT / "equipment.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["OMNICLASS_SYSTEM", "OMNICLASS_TYPE", "AugmentID_Type", "AugmentID_Instance",
                    "Space_Instance", "discipline", "om_properties"])
        for cat, space in items:
            system, typ, disc, props = CATEGORIES[cat]
            w.writerow([system, typ, "", "", space, disc, json.dumps(props, sort_keys=True)])
        system, typ, disc, props = PANEL
        w.writerow([system, typ, "", "", "Electrical Room B02", disc, json.dumps(props, sort_keys=True)])

    with open(OUT / "sensors.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["equipment_type", "kind", "dashboard_support", "live_capable", "interval_s",
                    "low", "high", "baseline", "diurnal_amplitude", "noise_sigma"])
        for cat, kind, ds, live, *rest in SENSORS:
            w.writerow([CATEGORIES[cat][1], kind, str(ds).lower(), str(live).lower(), *rest])

    with open(OUT / "rules.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["equipment_type", "kind", "low", "high", "raise_debounce", "clear_debounce"])
        for cat, *rest in RULES:
            w.writerow([CATEGORIES[cat][1], *rest])

    with open(OUT / "policies.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["policy_id", "target_type", "target", "tasks", "frequency_days", "start_date", "resources"])
        for row in POLICIES:
            w.writerow(row)

    counts = {}
    for cat, _ in items:
        counts[cat] = counts.get(cat, 0) + 1
    order = ["AHU", "ERU", "VAV", "hot water pumps", "temperature sensors", "humidity sensors", "CO sensors",
             "lighting fixtures", "transformers", "faucets", "sinks", "toilets", "urinals", "service sinks",
             "water heaters", "drinking fountains", "elevators", "generator", "occupancy sensors"]
    cat_count = {c: 0 for c in CATEGORIES}
    for cat, _ in items:
        cat_count[cat] += 1
    primary = sum(cat_count[c] for c, k, ds, *_ in SENSORS if not ds for _ in [0])
    sensor_bindings = sum(cat_count[c] for c, k, ds, *_ in SENSORS if not ds)
    dashboard_bindings = sum(cat_count[c] for c, k, ds, *_ in SENSORS if ds)
    manifest = {
        "version": 1,
        "as_of": "2024-01-01T00:00:00Z",
        "building_id": "pgb",
        "provenance": "synthetic room roster; named example rooms and equipment category counts follow the case study",
        "space_count": len(space_rows),
        "equipment_counts": {c: counts[c] for c in order},
        "equipment_total": sum(counts.values()),
        "headline_total": 509,
        "category_types": {c: number(CATEGORIES[c][1]) for c in order},
        "dashboard_support_counts": {"panel boards": 1},
        "dashboard_support_types": {"panel boards": number(PANEL[1])},
        "sensor_binding_count": sensor_bindings,
        "dashboard_sensor_count": dashboard_bindings,
        "policy_count": len(POLICIES),
    }
    (OUT / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(manifest["equipment_total"], sensor_bindings, dashboard_bindings, len(space_rows))


if __name__ == "__main__":
    main()
