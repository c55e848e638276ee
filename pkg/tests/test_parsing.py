import pytest
from hypothesis import given, strategies as st

from verbaplan.errors import EmptyInput, ParseFailure
from verbaplan.parsing import POS_TAGS, parse, parse_command, tokenize


def shape(tree):
    return [(tree.node(i).text, tree.node(i).pos_tag, tuple(tree.node(i).children)) for i in tree.bfs_ids()]


def test_tokenize_basic():
    assert tokenize("Put the cup on the table.").tokens == ("put", "the", "cup", "on", "the", "table")


def test_tokenize_contraction():
    assert tokenize("Don't put it there").tokens == ("don't", "put", "it", "there")


def test_tokenize_empty():
    with pytest.raises(EmptyInput):
        tokenize("   ")
    with pytest.raises(EmptyInput):
        tokenize("42 17 ...")


def test_parse_put_cup_on_table():
    t = parse_command("Put the cup on the table")
    assert shape(t) == [
        ("put", "VB", (2, 3)),
        ("the cup", "NP", ()),
        ("on", "PP", (4,)),
        ("the table", "NP", ()),
    ]


def test_parse_dont_put_it_there():
    t = parse_command("Don't put it there")
    assert shape(t) == [
        ("don't", "VB-NEG", (2,)),
        ("put", "VB", (3, 4)),
        ("it", "PRP", ()),
        ("there", "RB", ()),
    ]


def test_parse_pick_up_one_of_the_blue_objects():
    # node inventory of the worked five-node grounding example
    t = parse_command("pick up one of the blue objects")
    texts = {t.node(i).text for i in t.bfs_ids()}
    assert texts == {"pick up", "one", "of", "the objects", "blue"}
    root = t.node(t.root)
    assert root.text == "pick up"
    assert [t.node(c).text for c in root.children] == ["one", "of"]
    of_node = next(t.node(i) for i in t.bfs_ids() if t.node(i).text == "of")
    # "of" dominates both "the objects" and "blue"
    dominated = set()
    stack = list(of_node.children)
    while stack:
        n = t.node(stack.pop())
        dominated.add(n.text)
        stack.extend(n.children)
    assert {"the objects", "blue"} <= dominated


def test_parse_multi_clause_linker_root():
    t = parse_command("move the can on the table, but don't put it on the book")
    root = t.node(t.root)
    assert root.text == "but"
    kids = [t.node(c).text for c in root.children]
    assert kids == ["move", "don't"]


def test_parse_single_verb():
    t = parse_command("stop")
    assert shape(t) == [("stop", "VB", ())]


def test_parse_distance_direction():
    t = parse_command("move 20 cm to the left")
    texts = {t.node(i).text for i in t.bfs_ids()}
    assert {"move", "20 cm", "to", "the left"} == texts


def test_negation_root_first_child_is_verb():
    for s in ["don't put it there", "never pick up that one", "do not move the cup"]:
        t = parse_command(s)
        root = t.node(t.root)
        assert root.pos_tag == "VB-NEG"
        assert t.node(root.children[0]).pos_tag == "VB"


def test_unknown_token_is_flagged_not_fatal():
    t = parse_command("blorf the cup")
    root = t.node(t.root)
    assert root.text == "blorf"
    assert root.unknown


def test_parse_failure_reports_prefix():
    with pytest.raises(ParseFailure) as exc:
        parse_command("the cup on")
    assert list(exc.value.prefix_tokens) == ["the", "cup"]


def test_all_tags_in_fixed_set():
    for s in ["put the cup on the table", "don't put it there", "move 20 cm to the left", "pick up that one"]:
        t = parse_command(s)
        for i in t.bfs_ids():
            assert t.node(i).pos_tag in POS_TAGS


SENTENCES = [
    "put the cup on the table",
    "pick up one of the blue objects",
    "don't put it there",
    "move the can on the table, but don't put it on the book",
    "move 20 cm to the left",
    "grab the nearest red object",
    "stop",
]


@pytest.mark.parametrize("s", SENTENCES)
def test_round_trip_tokens(s):
    t = parse_command(s)
    pairs = []
    for i in t.bfs_ids():
        n = t.node(i)
        pairs.extend(zip(n.token_positions, n.text.split()))
    assert [w for _, w in sorted(pairs)] == list(t.tokens)
    # every token owned exactly once
    assert sorted(p for p, _ in pairs) == list(range(len(t.tokens)))


@pytest.mark.parametrize("s", SENTENCES)
def test_parse_deterministic(s):
    a = parse_command(s).to_json()
    b = parse_command(s).to_json()
    assert a == b


@given(st.sampled_from(SENTENCES), st.sampled_from([" ", "  ", "\t"]))
def test_whitespace_insensitive(s, pad):
    assert parse_command(s).to_json() == parse_command(s.replace(" ", pad)).to_json()


def test_tree_dict_round_trip():
    from verbaplan.parsing import ParseTree

    t = parse_command("put the cup on the table")
    t2 = ParseTree.from_dict(t.to_dict())
    assert t2.to_json() == t.to_json()
