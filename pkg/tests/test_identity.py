import collections
import threading
from concurrent.futures import ThreadPoolExecutor

import pytest

from repsim.errors import (
    AlreadyRedeemed,
    AlreadySpent,
    DuplicateRegistration,
    ExpiredPseudonym,
    InvalidPseudonym,
    SelfContract,
    TicketExpired,
    UnknownBusiness,
    UnknownToken,
)
from repsim.identity import Authority, BusinessId, ContractEvent, Pseudonym, check_pseudonym


@pytest.fixture
def auth():
    return Authority(seed=7)


@pytest.fixture
def pair(auth):
    return auth.register_business("ACME", "DE"), auth.register_business("BETA", "FR")


class TestRegistration:
    def test_duplicate(self, auth):
        auth.register_business("ACME")
        with pytest.raises(DuplicateRegistration):
            auth.register_business("ACME")

    def test_distinct(self, pair):
        assert pair[0].id != pair[1].id

    def test_hundred_unique(self, auth):
        ids = {auth.register_business(f"firm-{i}").id for i in range(100)}
        assert len(ids) == 100


class TestPseudonyms:
    def test_fresh_and_valid(self, auth, pair):
        p1, p2 = auth.issue_pseudonym(pair[0]), auth.issue_pseudonym(pair[0])
        assert p1.handle != p2.handle
        auth.check(p1)
        auth.check(p2)

    def test_unknown_business(self, auth):
        with pytest.raises(UnknownBusiness):
            auth.issue_pseudonym(BusinessId("biz:nobody"))

    def test_forged_signature(self, auth, pair):
        p = auth.issue_pseudonym(pair[0])
        forged = Pseudonym(p.handle, p.epoch + 1, p.authority_signature)
        with pytest.raises(InvalidPseudonym):
            auth.check(forged)

    def test_expiry(self, auth, pair):
        p = auth.issue_pseudonym(pair[0])
        for _ in range(auth.pseudonym_lifetime):
            auth.advance_epoch()
        with pytest.raises(ExpiredPseudonym):
            auth.check(p)
        auth.check(auth.standing_pseudonym(pair[0]))

    def test_uniformity_sweep(self, auth):
        firms = [auth.register_business(f"f{i}") for i in range(10)]
        handles = {f.id: [auth.issue_pseudonym(f).handle for _ in range(100)] for f in firms}
        flat = [h for hs in handles.values() for h in hs]
        assert len(set(flat)) == 1000
        hexes = "".join(h[3:] for h in flat)
        counts = collections.Counter(hexes)
        expected = len(hexes) / 16
        chi2 = sum((counts[c] - expected) ** 2 / expected for c in "0123456789abcdef")
        assert chi2 < 37.7  # chi-square, 15 dof, p = 0.001
        # leading hex digit is not shared within a business more than chance allows
        for hs in handles.values():
            top = collections.Counter(h[3] for h in hs).most_common(1)[0][1]
            assert top < 25


class TestContracts:
    def test_two_tickets(self, auth, pair):
        a, b = pair
        t_ab, t_ba = auth.establish_contract(ContractEvent(a, b, {"order": 1}))
        assert t_ab.contract_digest == t_ba.contract_digest
        assert t_ab.votee_pseudonym == auth.standing_pseudonym(b).handle
        assert t_ba.votee_pseudonym == auth.standing_pseudonym(a).handle
        assert auth.owner_of(t_ab.voter_pseudonym) == a.id
        assert auth.owner_of(t_ba.voter_pseudonym) == b.id

    def test_self_contract(self, pair):
        with pytest.raises(SelfContract):
            ContractEvent(pair[0], pair[0])

    def test_repeat_contracts_four_tickets(self, auth, pair):
        tickets = auth.establish_contract(ContractEvent(*pair)) + auth.establish_contract(
            ContractEvent(*pair, timestamp=1))
        assert len({t.ticket_id for t in tickets}) == 4

    def test_unknown_party(self, auth, pair):
        with pytest.raises(UnknownBusiness):
            auth.establish_contract(ContractEvent(pair[0], BusinessId("biz:ghost")))


class TestSpend:
    def test_single_use(self, auth, pair):
        t, _ = auth.establish_contract(ContractEvent(*pair))
        authz = auth.spend_ticket(t)
        assert t.spent
        assert authz.votee_pseudonym == t.votee_pseudonym
        assert authz.verify(auth.public_key)
        assert t.voter_pseudonym not in str(authz.to_dict())
        with pytest.raises(AlreadySpent):
            auth.spend_ticket(t)

    def test_expired_voter_pseudonym(self, auth, pair):
        t, _ = auth.establish_contract(ContractEvent(*pair))
        for _ in range(auth.pseudonym_lifetime):
            auth.advance_epoch()
        with pytest.raises(ExpiredPseudonym):
            auth.spend_ticket(t)

    def test_ticket_window(self):
        auth = Authority(seed=1, ticket_window=5, epoch_length=1000)
        a, b = auth.register_business("A"), auth.register_business("B")
        t, _ = auth.establish_contract(ContractEvent(a, b, timestamp=0))
        auth.advance(6)
        with pytest.raises(TicketExpired):
            auth.spend_ticket(t)

    @pytest.mark.parametrize("n", [2, 8, 32])
    def test_concurrent_race(self, auth, pair, n):
        t, _ = auth.establish_contract(ContractEvent(*pair))
        barrier = threading.Barrier(n)

        def attempt(_):
            barrier.wait()
            try:
                auth.spend_ticket(t.ticket_id)
                return True
            except AlreadySpent:
                return False

        with ThreadPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(attempt, range(n)))
        assert results.count(True) == 1


class TestTokens:
    def test_fresh(self, auth, pair):
        p = auth.issue_pseudonym(pair[0])
        assert auth.mint_access_token(p).token_id != auth.mint_access_token(p).token_id

    def test_no_identity_substring(self, auth, pair):
        p = auth.issue_pseudonym(pair[0])
        secrets = {pair[0].id, pair[1].id, p.handle, auth.standing_pseudonym(pair[0]).handle}
        for _ in range(1000):
            tok = auth.mint_access_token(p)
            for s in secrets:
                assert s not in tok.token_id and s[3:] not in tok.token_id
                assert s not in tok.bound_reputation_ref

    def test_expired(self, auth, pair):
        p = auth.issue_pseudonym(pair[0])
        for _ in range(auth.pseudonym_lifetime):
            auth.advance_epoch()
        with pytest.raises(ExpiredPseudonym):
            auth.mint_access_token(p)

    def test_one_time(self, auth, pair):
        tok = auth.mint_access_token(auth.issue_pseudonym(pair[0]))
        assert auth.redeem_access_token(tok) == tok.bound_reputation_ref
        assert tok.redeemed
        with pytest.raises(AlreadyRedeemed):
            auth.redeem_access_token(tok)

    def test_unknown(self, auth):
        with pytest.raises(UnknownToken):
            auth.redeem_access_token("tok:" + "00" * 16)

    def test_k_refs_one_record(self, auth, pair):
        p = auth.issue_pseudonym(pair[0])
        tokens = [auth.mint_access_token(p) for _ in range(12)]
        refs = [auth.redeem_access_token(t) for t in tokens]
        assert len(set(refs)) == 12
        assert {auth.tokens.resolve(r) for r in refs} == {auth.standing_pseudonym(pair[0]).handle}

    def test_concurrent_redeem(self, auth, pair):
        tok = auth.mint_access_token(auth.issue_pseudonym(pair[0]))

        def attempt(_):
            try:
                auth.redeem_access_token(tok.token_id)
                return True
            except AlreadyRedeemed:
                return False

        with ThreadPoolExecutor(max_workers=16) as pool:
            assert list(pool.map(attempt, range(16))).count(True) == 1


def test_snapshot_contains_secret_map(auth, pair):
    p = auth.issue_pseudonym(pair[0])
    snap = auth.snapshot()
    assert snap["secret"]["pseudonyms"][p.handle] == pair[0].id
    assert {b["legal_identity"] for b in snap["businesses"]} == {"ACME", "BETA"}


def test_check_pseudonym_standalone(auth, pair):
    p = auth.issue_pseudonym(pair[0])
    check_pseudonym(Pseudonym.from_dict(p.to_dict()), auth.public_key, auth.epoch)
