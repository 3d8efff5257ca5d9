import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wwengine.errors import (DuplicateProject, FileNotFound, InvalidName,
                             InvalidPath, NoSuchProject)
from wwengine.store import ProjectOptions, SourceFile, Store

from .helpers import put


def test_create_empty_project(engine):
    p = engine.store.create_project("ExampleProject")
    assert p.name == "ExampleProject"
    assert p.sources == {}
    assert "ExampleProject" in engine.store.list_projects()


def test_create_project_with_separator_rejected(engine):
    with pytest.raises(InvalidName):
        engine.store.create_project("a/b")


def test_create_twice_is_duplicate(engine):
    engine.store.create_project("Twice")
    with pytest.raises(DuplicateProject):
        engine.store.create_project("Twice")


def test_put_source_file_returns_revision_one(engine):
    engine.store.create_project("ExampleProject")
    rev = put(engine, "ExampleProject", "example.R",
              'plot(function(x){-x*cos(x-1)}, -pi, pi, col="blue");')
    assert rev == 1


def test_put_same_content_twice_increments_revision(engine):
    engine.store.create_project("P")
    r1 = put(engine, "P", "a.txt", "same")
    r2 = put(engine, "P", "a.txt", "same")
    assert r2 == r1 + 1
    assert engine.store.get_source_file("P", "a.txt").content == b"same"


def test_put_traversal_path_rejected(engine):
    engine.store.create_project("P")
    with pytest.raises(InvalidPath):
        put(engine, "P", "../x", "nope")


def test_put_into_missing_project(engine):
    with pytest.raises(NoSuchProject):
        engine.store.put_source_file("Ghost", SourceFile("a", b"x"))


def test_remove_existing_source(engine):
    put(engine, "P", "a.txt", "x")
    assert engine.store.remove_source_file("P", "a.txt") is True


def test_remove_absent_source_is_false_not_error(engine):
    engine.store.create_project("P")
    assert engine.store.remove_source_file("P", "nothere.txt") is False


def test_remove_then_sync_deletes_working_copy(engine):
    put(engine, "P", "a.txt", "x")
    engine.workspace.sync("P", "persistent")
    workdir = engine.sessions.persistent_dir("P")
    assert (workdir / "a.txt").exists()
    engine.store.remove_source_file("P", "a.txt")
    report = engine.workspace.sync("P", "persistent")
    assert "a.txt" in report.deleted
    assert not (workdir / "a.txt").exists()


def test_list_projects_sorted(engine):
    engine.store.create_project("Zeta")
    engine.store.create_project("Alpha")
    assert engine.store.list_projects() == ["Alpha", "Zeta"]


def test_delete_then_get_is_missing(engine):
    engine.store.create_project("Gone")
    engine.delete_project("Gone")
    with pytest.raises(NoSuchProject):
        engine.store.get_project("Gone")


def test_get_missing_source(engine):
    engine.store.create_project("P")
    with pytest.raises(FileNotFound):
        engine.store.get_source_file("P", "nope")


def test_options_round_trip(engine):
    opts = ProjectOptions(detached_subdirs=["big"], dependencies=[])
    engine.store.create_project("P", opts)
    got = engine.store.get_project("P").options
    assert got.detached_subdirs == ["big"]


def test_self_dependency_rejected_in_options(engine):
    with pytest.raises(ValueError):
        ProjectOptions(dependencies=["P"]).validate("P")


@settings(max_examples=30, deadline=None)
@given(content=st.binary(max_size=2048),
       attrs=st.dictionaries(st.text(st.characters(codec="ascii"),
                                     min_size=1, max_size=10),
                             st.text(max_size=20), max_size=4))
def test_round_trip_byte_identical(content, attrs):
    from .helpers import destroy_engine, make_engine
    engine = make_engine()
    try:
        engine.store.create_project("RT")
        engine.store.put_source_file("RT", SourceFile(
            filename="blob.bin", content=content, attributes=attrs))
        back = engine.store.get_source_file("RT", "blob.bin")
        assert back.content == content
        assert back.attributes == attrs
    finally:
        destroy_engine(engine)


def test_persistence_across_restart(engine_root, engine):
    put(engine, "Persist", "keep.txt", "forever", attributes={"display": "none"})
    engine.close()
    fresh = Store(engine_root)
    assert "Persist" in [p for p in fresh.list_projects()]
    sf = fresh.get_source_file("Persist", "keep.txt")
    assert sf.content == b"forever"
    assert sf.attributes == {"display": "none"}


def test_revision_strictly_increases_across_put_and_remove(engine):
    engine.store.create_project("P")
    seen = []
    seen.append(put(engine, "P", "a", "1"))
    seen.append(put(engine, "P", "b", "2"))
    engine.store.remove_source_file("P", "a")
    seen.append(engine.store.get_project("P").revision)
    assert seen == sorted(seen) and len(set(seen)) == len(seen)
