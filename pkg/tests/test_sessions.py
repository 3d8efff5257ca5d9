import os

import pytest

from wwengine.errors import NoSuchProject, NoSuchSession, SessionBusy
from wwengine.store import ProjectOptions
from wwengine.util import hash_tree

from .helpers import put


def preview(engine, *projects):
    return engine.sessions.create(list(projects), kind="preview")


class TestCreatePreview:
    def test_copies_persistent_files(self, engine):
        put(engine, "P", "a.txt", "A")
        put(engine, "P", "b.txt", "B")
        engine.workspace.sync("P", "persistent")
        ref = preview(engine, "P")
        d = engine.sessions.working_dir("P", ref.id)
        assert (d / "a.txt").read_text() == "A"
        assert (d / "b.txt").read_text() == "B"

    def test_empty_project_gives_valid_empty_session(self, engine):
        engine.store.create_project("Empty")
        ref = preview(engine, "Empty")
        d = engine.sessions.working_dir("Empty", ref.id)
        assert d.exists()
        assert engine.workspace.list_files("Empty", ref.id) == []

    def test_missing_project(self, engine):
        with pytest.raises(NoSuchProject):
            preview(engine, "Ghost")

    def test_detached_subdir_not_copied(self, engine):
        engine.store.create_project(
            "P", ProjectOptions(detached_subdirs=["big"]))
        pdir = engine.sessions.persistent_dir("P")
        (pdir / "big").mkdir()
        (pdir / "big" / "huge.bin").write_bytes(b"x" * 100)
        ref = preview(engine, "P")
        d = engine.sessions.working_dir("P", ref.id)
        assert (d / "big").is_symlink()
        assert (d / "big" / "huge.bin").read_bytes() == b"x" * 100
        assert "big/huge.bin" not in ref.snapshot["P"]

    def test_detached_subdir_write_rejected_for_preview_recipe(self, priv_engine):
        engine = priv_engine
        engine.store.create_project(
            "P", ProjectOptions(detached_subdirs=["big"]))
        pdir = engine.sessions.persistent_dir("P")
        (pdir / "big").mkdir()
        put(engine, "P", "Makefile",
            "poke:\n\techo dirty > big/poked.txt\n")
        ref = preview(engine, "P")
        engine.workspace.sync("P", ref.id)
        result = engine.workspace.make_target("P", ref.id, "poke")
        assert result.status == "failed"
        assert not (pdir / "big" / "poked.txt").exists()


class TestIsolationAndMerge:
    def test_preview_build_leaves_persistent_untouched(self, engine):
        put(engine, "P", "fig.R", "plot(1);")
        engine.workspace.sync("P", "persistent")
        before = hash_tree(engine.sessions.persistent_dir("P"))
        ref = preview(engine, "P")
        engine.workspace.sync("P", ref.id)
        engine.workspace.make_target("P", ref.id, "fig.Rout.png")
        assert hash_tree(engine.sessions.persistent_dir("P")) == before

    def test_merge_copies_built_product(self, engine):
        put(engine, "P", "fig.R", "plot(1);")
        engine.workspace.sync("P", "persistent")
        ref = preview(engine, "P")
        engine.workspace.sync("P", ref.id)
        engine.workspace.make_target("P", ref.id, "fig.Rout.png")
        report = engine.sessions.merge(ref.id)
        assert "fig.Rout.png" in report.copied
        assert report.skipped_conflicts == []
        assert (engine.sessions.persistent_dir("P") / "fig.Rout.png").exists()

    def test_noop_merge(self, engine):
        put(engine, "P", "a.txt", "A")
        engine.workspace.sync("P", "persistent")
        before = hash_tree(engine.sessions.persistent_dir("P"))
        ref = preview(engine, "P")
        report = engine.sessions.merge(ref.id)
        assert report.copied == [] and report.skipped_conflicts == []
        assert hash_tree(engine.sessions.persistent_dir("P")) == before

    def test_conflict_persistent_wins(self, engine):
        put(engine, "P", "a.txt", "A")
        engine.workspace.sync("P", "persistent")
        ref = preview(engine, "P")
        sdir = engine.sessions.working_dir("P", ref.id)
        pdir = engine.sessions.persistent_dir("P")
        (sdir / "shared.txt").write_text("from session")
        (pdir / "shared.txt").write_text("from persistent")
        report = engine.sessions.merge(ref.id)
        assert report.skipped_conflicts == ["shared.txt"]
        assert (pdir / "shared.txt").read_text() == "from persistent"

    def test_both_sides_same_change_is_not_conflict(self, engine):
        put(engine, "P", "a.txt", "A")
        engine.workspace.sync("P", "persistent")
        ref = preview(engine, "P")
        sdir = engine.sessions.working_dir("P", ref.id)
        pdir = engine.sessions.persistent_dir("P")
        (sdir / "same.txt").write_text("identical")
        (pdir / "same.txt").write_text("identical")
        report = engine.sessions.merge(ref.id)
        assert report.skipped_conflicts == []

    def test_merge_destroys_session(self, engine):
        engine.store.create_project("P")
        ref = preview(engine, "P")
        engine.sessions.merge(ref.id)
        with pytest.raises(NoSuchSession):
            engine.sessions.get(ref.id)

    def test_detached_changes_never_merged(self, engine):
        engine.store.create_project(
            "P", ProjectOptions(detached_subdirs=["big"]))
        pdir = engine.sessions.persistent_dir("P")
        (pdir / "big").mkdir()
        ref = preview(engine, "P")
        report = engine.sessions.merge(ref.id)
        assert all(not c.startswith("big/") for c in report.copied)


class TestDestroyAndGc:
    def test_destroy_then_use_fails(self, engine):
        engine.store.create_project("P")
        ref = preview(engine, "P")
        engine.sessions.destroy(ref.id)
        with pytest.raises(NoSuchSession):
            engine.workspace.get_file("P", ref.id, "x.txt")

    def test_gc_zero_collects_idle_preview(self, engine):
        engine.store.create_project("P")
        ref = preview(engine, "P")
        collected = engine.sessions.gc(0)
        assert [r.id for r in collected] == [ref.id]
        assert not engine.sessions.session_exists(ref.id)

    def test_gc_never_touches_persistent_or_jobs(self, engine):
        engine.store.create_project("P")
        job_ref = engine.sessions.create(["P"], kind="job")
        collected = engine.sessions.gc(0)
        assert all(r.kind == "preview" for r in collected)
        assert engine.sessions.session_exists(job_ref.id)
        assert engine.sessions.session_exists("persistent")

    def test_merge_refused_while_building(self, engine):
        engine.store.create_project("P")
        ref = preview(engine, "P")
        engine.busy.enter(ref.id)
        try:
            with pytest.raises(SessionBusy):
                engine.sessions.merge(ref.id)
            with pytest.raises(SessionBusy):
                engine.sessions.destroy(ref.id)
        finally:
            engine.busy.leave(ref.id)


def test_concurrent_previews_are_isolated(engine):
    put(engine, "P", "seed.txt", "s")
    engine.workspace.sync("P", "persistent")
    ref1 = engine.sessions.create(["P"], kind="preview")
    ref2 = engine.sessions.create(["P"], kind="preview")
    d1 = engine.sessions.working_dir("P", ref1.id)
    d2 = engine.sessions.working_dir("P", ref2.id)
    (d1 / "only1.txt").write_text("1")
    assert not (d2 / "only1.txt").exists()
