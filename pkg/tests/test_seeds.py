from amg.seeds import fanout


def test_same_path_same_child():
    assert fanout(7, "env", 3, 1) == fanout(7, "env", 3, 1)


def test_distinct_paths_distinct_children():
    seen = {fanout(7, "env", i, j) for i in range(20) for j in range(20)}
    assert len(seen) == 400


def test_root_seed_changes_children():
    assert fanout(1, "x") != fanout(2, "x")


def test_int_and_string_tags_do_not_collide():
    assert fanout(0, 1) != fanout(0, "1")


def test_result_is_64_bit_non_negative():
    for seed in (0, 1, 2**63, 2**64 - 1, -5):
        child = fanout(seed, "t")
        assert 0 <= child < 2**64
