import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wifiworm import ingest
from wifiworm.ingest import (Encryption, IngestConfig, PasswordTier, RecordKind, RouterRecord,
                             assign_profiles, dedupe_and_cap, filter_probes, parse_records,
                             randomize_positions, synth_city)
from wifiworm.spatialnet import geo_distance

HEADER = "bssid,lat,lon,type,encryption\n"


def rec(i, lat=41.88, lon=-87.63, kind=RecordKind.INFRASTRUCTURE, enc=Encryption.OPEN):
    return RouterRecord(f"B{i}", lat, lon, kind, enc)


def test_parse_single_row():
    out = parse_records(HEADER + "AA:BB,41.88,-87.63,infra,wep\n")
    assert out == [RouterRecord("AA:BB", 41.88, -87.63, RecordKind.INFRASTRUCTURE, Encryption.WEP)]


def test_parse_header_only():
    assert parse_records(HEADER) == []


def test_parse_bytes_and_case_insensitive_encryption():
    data = (HEADER + "a,1,2,infra,WPA\nb,1,2,probe,None\n").encode()
    out = parse_records(io.BytesIO(data))
    assert [r.encryption for r in out] == [Encryption.WPA, Encryption.OPEN]
    assert out[1].kind is RecordKind.PROBE


def test_parse_keeps_probes():
    rows = [f"p{i},41.0,-87.0,{'probe' if i < 37 else 'infra'},none" for i in range(1000)]
    out = parse_records(HEADER + "\n".join(rows))
    assert len(out) == 1000
    assert sum(r.kind is RecordKind.PROBE for r in out) == 37


def test_parse_unknown_encryption_maps_to_open():
    report = ingest.ParseReport()
    out = parse_records(HEADER + "a,1,2,infra,wpa3-sae\n", report=report)
    assert out[0].encryption is Encryption.OPEN
    assert report.unknown_encryption == 1


def test_parse_missing_column_is_fatal():
    with pytest.raises(ingest.IngestError, match="encryption"):
        parse_records("bssid,lat,lon,type\na,1,2,infra\n")


def test_parse_few_bad_rows_collected():
    good = [f"g{i},1,2,infra,none" for i in range(20)]
    report = ingest.ParseReport()
    out = parse_records(HEADER + "\n".join(good + ["bad,not-a-number,2,infra,none"]),
                        report=report)
    assert len(out) == 20
    assert [e.line for e in report.errors] == [22]


def test_parse_many_bad_rows_fatal():
    rows = [f"g{i},1,2,infra,none" for i in range(5)] + ["x,999,2,infra,none"] * 2
    with pytest.raises(ingest.IngestError, match="line 7"):
        parse_records(HEADER + "\n".join(rows))


def test_record_invariants():
    with pytest.raises(ValueError):
        RouterRecord("", 0, 0)
    with pytest.raises(ValueError):
        RouterRecord("a", 91, 0)
    with pytest.raises(ValueError):
        RouterRecord("a", 0, -181)


def test_filter_probes_counts_and_order():
    records = [rec(i, kind=RecordKind.PROBE if i % 25 == 0 else RecordKind.INFRASTRUCTURE)
               for i in range(100)]
    out = filter_probes(records)
    assert len(out) == 96
    assert out == [r for r in records if r.kind is RecordKind.INFRASTRUCTURE]
    clean = [rec(i) for i in range(10)]
    assert filter_probes(clean) == clean


def test_filter_probes_small_share():
    # 3.7% probes
    records = [rec(i, kind=RecordKind.PROBE if i < 37 else RecordKind.INFRASTRUCTURE)
               for i in range(1000)]
    assert len(filter_probes(records)) / 1000 == pytest.approx(0.963)


def test_cap_per_location():
    records = [rec(i) for i in range(25)]
    out = dedupe_and_cap(records, 20)
    assert out == records[:20]


def test_dedupe_bssid_keeps_first():
    a = RouterRecord("same", 1.0, 2.0)
    b = RouterRecord("same", 3.0, 4.0)
    assert dedupe_and_cap([a, b], 20) == [a]


def test_dedupe_corpus_share():
    # 953 single sites plus one 47-router building: 27 over the cap of 20
    records = [rec(i, lat=40 + i * 1e-3) for i in range(953)] + [rec(1000 + i) for i in range(47)]
    out = dedupe_and_cap(records, 20)
    assert (len(records) - len(out)) / len(records) == pytest.approx(0.027)
    repeats = records + [RouterRecord(f"B{i}", 10.0, 10.0) for i in range(5)]
    assert len(dedupe_and_cap(repeats, 20)) == len(out)


def test_randomize_zero_radius_identity():
    records = [rec(i, lat=41.0 + i * 1e-4) for i in range(10)]
    assert randomize_positions(records, 0.0, np.random.default_rng(0)) == records


def test_randomize_within_radius():
    rng = np.random.default_rng(1)
    records = [rec(i, lat=rng.uniform(-60, 60), lon=rng.uniform(-170, 170)) for i in range(10_000)]
    moved = randomize_positions(records, 10.0, np.random.default_rng(2))
    d = np.array([geo_distance((a.lat, a.lon), (b.lat, b.lon)) for a, b in zip(records, moved)])
    assert d.max() <= 10.0 + 1e-6
    assert [r.bssid for r in moved] == [r.bssid for r in records]


def test_randomize_mean_displacement_two_thirds():
    # E[r] = 2R/3 for a uniform point of a disk of radius R
    records = [rec(i) for i in range(100_000)]
    moved = randomize_positions(records, 30.0, np.random.default_rng(3))
    d = np.array([geo_distance((r.lat, r.lon), (m.lat, m.lon)) for r, m in zip(records, moved)])
    assert d.mean() == pytest.approx(20.0, rel=0.01)


def test_randomize_deterministic():
    records = [rec(i) for i in range(50)]
    a = randomize_positions(records, 10.0, np.random.default_rng(5))
    b = randomize_positions(records, 10.0, np.random.default_rng(5))
    assert a == b


def _binom_ok(count, n, p):
    return abs(count - n * p) <= 3 * math.sqrt(n * p * (1 - p))


def test_assign_wpa_split():
    n = 100_000
    records = [rec(i, enc=Encryption.WEP) for i in range(n)]
    prof = assign_profiles(records, IngestConfig(), np.random.default_rng(0))
    wpa = sum(p.encryption is Encryption.WPA for p in prof)
    assert _binom_ok(wpa, n, 0.30)
    # WEP routers always carry a user password
    assert all(p.password_tier is not PasswordTier.DEFAULT for p in prof)


def test_assign_all_wpa():
    records = [rec(i, enc=Encryption.WEP) for i in range(100)]
    prof = assign_profiles(records, IngestConfig(wpa_fraction_of_encrypted=1.0),
                           np.random.default_rng(0))
    assert all(p.encryption is Encryption.WPA for p in prof)


def test_assign_tier_marginals():
    n = 100_000
    records = [rec(i) for i in range(n)]
    cfg = IngestConfig(nopass_fraction_of_open=0.0)
    prof = assign_profiles(records, cfg, np.random.default_rng(11))
    tiers = np.array([p.password_tier for p in prof])
    assert _binom_ok((tiers == PasswordTier.IN_DICT1).sum(), n, 0.25)
    assert _binom_ok((tiers == PasswordTier.IN_DICT2).sum(), n, 0.11)
    assert _binom_ok((tiers == PasswordTier.UNCRACKABLE).sum(), n, 0.64)


def test_assign_default_iff_nopass():
    records = [rec(i, enc=Encryption.OPEN if i % 3 else Encryption.WEP) for i in range(3000)]
    prof = assign_profiles(records, IngestConfig(), np.random.default_rng(4))
    for r, p in zip(records, prof):
        if p.password_tier is PasswordTier.DEFAULT:
            assert p.encryption is Encryption.OPEN
    n_open = sum(not r.encrypted for r in records)
    n_default = sum(p.password_tier is PasswordTier.DEFAULT for p in prof)
    assert _binom_ok(n_default, n_open, 0.5)


def test_config_validation():
    with pytest.raises(ValueError):
        IngestConfig(dict1_fraction=0.7, dict2_fraction=0.4)
    with pytest.raises(ValueError):
        IngestConfig(overlap_cap=0)
    with pytest.raises(ValueError):
        IngestConfig(wpa_fraction_of_encrypted=1.5)


def test_synth_rejects_zero_nodes():
    with pytest.raises(ValueError):
        synth_city(0, (0, 0, 1, 1))


def test_synth_encrypted_fraction():
    out = synth_city(1000, ingest.city_bbox(41.88, -87.63, 2000), encrypted_fraction=0.337,
                     rng=np.random.default_rng(9))
    enc = sum(r.encrypted for r in out)
    assert _binom_ok(enc, 1000, 0.337)


def test_synth_deterministic_bytes():
    def make():
        recs = synth_city(300, ingest.city_bbox(41.88, -87.63, 1000),
                          [ingest.Cluster(41.88, -87.63, 100.0, 0.4)], 0.3,
                          np.random.default_rng(42))
        buf = io.StringIO()
        ingest.write_records(recs, buf)
        return buf.getvalue()

    text = make()
    assert text == make()
    # and it parses back to the same records
    assert len(parse_records(text)) == 300


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 30), st.integers(0, 3), st.booleans()), max_size=80),
       st.integers(1, 5))
def test_pipeline_counts_never_grow(rows, cap):
    records = [RouterRecord(f"b{b}", 40.0 + loc * 1e-3, -80.0,
                            RecordKind.PROBE if probe else RecordKind.INFRASTRUCTURE)
               for b, loc, probe in rows]
    a = filter_probes(records)
    b = dedupe_and_cap(a, cap)
    assert len(b) <= len(a) <= len(records)
    c = randomize_positions(b, 5.0, np.random.default_rng(0))
    d = assign_profiles(c, IngestConfig(), np.random.default_rng(0))
    assert len(c) == len(d) == len(b)
    sites = {}
    for r in b:
        sites[(r.lat, r.lon)] = sites.get((r.lat, r.lon), 0) + 1
    assert all(v <= cap for v in sites.values())
    assert len({r.bssid for r in b}) == len(b)
