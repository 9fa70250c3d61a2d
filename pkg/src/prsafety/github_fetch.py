"""Incremental GitHub REST v3 exporter producing canonical corpus files.

The exporter walks the paginated list endpoints of one repository (pulls,
issue comments, review comments, commits, plus per-user profiles for
follower counts), staging raw pages to disk and recording progress in
fetch_cursor.json after every page.  An interrupted run resumes from the
cursor and never refetches completed pages; finalization deduplicates by
natural key, so re-running cannot produce duplicate pull numbers.

Requests are strictly sequential (one in flight per repository).  A 403
with an exhausted rate-limit header sleeps until the advertised reset; a
404 is fatal; timeouts and 5xx responses retry up to a cap.  Authentication
comes exclusively from an environment variable named by the job, never from
a flag value, so tokens stay out of process listings and shell history.

Comment roles are derived at export time with the corpus rule: the PR
author is the contributor; whoever merged or closed the PR, or holds an
owner or member association, is an integrator; review-comment authors are
reviewers (review submissions without inline comments are not fetched,
which keeps the request budget linear in pages); everyone else is other.

Context fields that a single-repository export cannot observe (languages
across repositories, follow relations, social tie strength) are written as
neutral defaults and listed in the report so downstream screening can judge
them.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping

import requests

from . import corpus as corpus_mod

API_BASE = "https://api.github.com"

DEFAULTED_CONTEXT_FIELDS = (
    "num_languages",
    "contrib_follow_integrator",
    "social_strength",
)

ENDPOINTS = ("pulls", "issue_comments", "review_comments", "commits")


class FetchError(Exception):
    """Unrecoverable export failure."""


class RepoNotFoundError(FetchError):
    """The repository does not exist or is not visible with this token."""


@dataclass(frozen=True)
class FetchJob:
    repo_full_name: str
    output_dir: str | Path
    since: str | None = None  # RFC 3339; limits comments and commits
    auth_token_source: str = "GITHUB_TOKEN"
    page_size: int = 100
    max_retries: int = 3

    def __post_init__(self) -> None:
        if "/" not in self.repo_full_name:
            raise ValueError(f"repo_full_name must be owner/name, got {self.repo_full_name!r}")
        if not 1 <= self.page_size <= 100:
            raise ValueError(f"page_size must be in [1, 100], got {self.page_size}")


@dataclass
class FetchReport:
    repo_full_name: str
    pulls: int = 0
    comments: int = 0
    commits: int = 0
    contributors: int = 0
    requests_made: int = 0
    rate_limit_waits: int = 0
    retries: int = 0
    resumed: bool = False
    defaulted_context_fields: tuple[str, ...] = DEFAULTED_CONTEXT_FIELDS

    def to_json(self) -> dict:
        return {
            "repo_full_name": self.repo_full_name,
            "pulls": self.pulls,
            "comments": self.comments,
            "commits": self.commits,
            "contributors": self.contributors,
            "requests_made": self.requests_made,
            "rate_limit_waits": self.rate_limit_waits,
            "retries": self.retries,
            "resumed": self.resumed,
            "defaulted_context_fields": list(self.defaulted_context_fields),
        }


class GitHubFetcher:
    """Sequential paginated exporter.

    session only needs a requests-compatible ``get``; tests inject fakes.
    sleep and now are injectable for rate-limit handling without real waits.
    """

    def __init__(
        self,
        session=None,
        base_url: str = API_BASE,
        sleep: Callable[[float], None] = time.sleep,
        now: Callable[[], float] = time.time,
        timeout: float = 30.0,
    ):
        self.session = session if session is not None else requests.Session()
        self.base_url = base_url.rstrip("/")
        self.sleep = sleep
        self.now = now
        self.timeout = timeout

    # -- low-level request handling -------------------------------------

    def _get(self, report: FetchReport, job: FetchJob, path: str, params: Mapping | None = None):
        headers = {"Accept": "application/vnd.github+json"}
        token = os.environ.get(job.auth_token_source, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        url = self.base_url + path
        attempts = 0
        while True:
            try:
                report.requests_made += 1
                response = self.session.get(url, params=dict(params or {}), headers=headers, timeout=self.timeout)
            except (requests.Timeout, requests.ConnectionError, TimeoutError, ConnectionError) as exc:
                attempts += 1
                report.retries += 1
                if attempts > job.max_retries:
                    raise FetchError(f"GET {path} failed after {job.max_retries} retries: {exc}") from None
                self.sleep(min(2.0**attempts, 30.0))
                continue
            status = response.status_code
            if status == 404:
                raise RepoNotFoundError(f"{job.repo_full_name}: GET {path} returned 404")
            if status == 403:
                remaining = response.headers.get("X-RateLimit-Remaining")
                reset = response.headers.get("X-RateLimit-Reset")
                retry_after = response.headers.get("Retry-After")
                if remaining == "0" and reset is not None:
                    # Primary limit: sleep until the advertised reset, then retry.
                    report.rate_limit_waits += 1
                    self.sleep(max(float(reset) - self.now(), 0.0) + 1.0)
                    continue
                if retry_after is not None:
                    report.rate_limit_waits += 1
                    self.sleep(float(retry_after))
                    continue
                raise FetchError(f"GET {path} returned 403 without rate-limit headers")
            if status >= 500:
                attempts += 1
                report.retries += 1
                if attempts > job.max_retries:
                    raise FetchError(f"GET {path} kept failing with {status}")
                self.sleep(min(2.0**attempts, 30.0))
                continue
            if status >= 400:
                raise FetchError(f"GET {path} returned {status}")
            return response

    # -- cursor and staging ----------------------------------------------

    @staticmethod
    def _cursor_path(out: Path) -> Path:
        return out / "fetch_cursor.json"

    @staticmethod
    def _staging_path(out: Path, endpoint: str) -> Path:
        return out / f"raw_{endpoint}.jsonl"

    def _fresh_cursor(self, job: FetchJob) -> dict:
        return {
            "repo_full_name": job.repo_full_name,
            "since": job.since,
            "page_size": job.page_size,
            "endpoints": {name: {"next_page": 1, "done": False} for name in ENDPOINTS},
            "complete": False,
        }

    def _load_cursor(self, job: FetchJob, out: Path) -> tuple[dict, bool]:
        path = self._cursor_path(out)
        if path.is_file():
            try:
                cursor = json.loads(path.read_text("utf-8"))
            except json.JSONDecodeError:
                cursor = None
            if (
                cursor
                and cursor.get("repo_full_name") == job.repo_full_name
                and cursor.get("since") == job.since
                and cursor.get("page_size") == job.page_size
            ):
                return cursor, True
        # Parameters changed or no usable cursor: start over.
        for endpoint in ENDPOINTS:
            self._staging_path(out, endpoint).unlink(missing_ok=True)
        return self._fresh_cursor(job), False

    @staticmethod
    def _save_cursor(out: Path, cursor: dict) -> None:
        path = out / "fetch_cursor.json"
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(cursor, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        os.replace(tmp, path)

    def _paginate(
        self,
        report: FetchReport,
        job: FetchJob,
        out: Path,
        cursor: dict,
        endpoint: str,
        path: str,
        params: Mapping,
    ) -> None:
        state = cursor["endpoints"][endpoint]
        if state["done"]:
            return
        staging = self._staging_path(out, endpoint)
        page = state["next_page"]
        while True:
            response = self._get(
                report, job, path, {**params, "per_page": job.page_size, "page": page}
            )
            items = response.json()
            if not isinstance(items, list):
                raise FetchError(f"GET {path} page {page}: expected a JSON array")
            with open(staging, "a", encoding="utf-8") as handle:
                for item in items:
                    handle.write(json.dumps(item, separators=(",", ":")) + "\n")
            done = len(items) < job.page_size
            state["next_page"] = page + 1
            state["done"] = done
            self._save_cursor(out, cursor)
            if done:
                return
            page += 1

    @staticmethod
    def _read_staging(out: Path, endpoint: str) -> list[dict]:
        path = out / f"raw_{endpoint}.jsonl"
        if not path.is_file():
            return []
        # A crash between a page append and the cursor save can re-stage a
        # page on resume; dedupe on the natural key (or the raw line).
        items = []
        seen = set()
        with open(path, encoding="utf-8") as handle:
            for line in handle:
                if not line.strip():
                    continue
                item = json.loads(line)
                key = item.get("id") or item.get("sha") or line.strip()
                if key in seen:
                    continue
                seen.add(key)
                items.append(item)
        return items

    # -- assembly ----------------------------------------------------------

    @staticmethod
    def _issue_number(item: Mapping) -> int | None:
        for key in ("issue_url", "pull_request_url"):
            url = item.get(key)
            if isinstance(url, str) and url.rsplit("/", 1)[-1].isdigit():
                return int(url.rsplit("/", 1)[-1])
        return None

    @staticmethod
    def _login(item: Mapping, key: str = "user") -> str | None:
        user = item.get(key)
        if isinstance(user, Mapping) and isinstance(user.get("login"), str):
            return user["login"]
        return None

    def fetch_repository(self, job: FetchJob) -> FetchReport:
        out = Path(job.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        report = FetchReport(repo_full_name=job.repo_full_name)

        cursor, resumed = self._load_cursor(job, out)
        report.resumed = resumed
        if cursor.get("complete"):
            # Identical job already finished: validate the artifacts and stop.
            result = corpus_mod.load_corpus(out)
            if result.errors:
                raise FetchError(f"existing output in {out} fails validation")
            counts = result.corpus.counts()
            report.pulls = counts["pulls"]
            report.comments = counts["comments"]
            report.commits = counts["commits"]
            report.contributors = counts["contexts"]
            return report

        repo_path = f"/repos/{job.repo_full_name}"
        meta_response = self._get(report, job, repo_path)
        meta = meta_response.json()

        since_params = {"since": job.since} if job.since else {}
        self._paginate(
            report, job, out, cursor, "pulls", f"{repo_path}/pulls",
            {"state": "all", "sort": "created", "direction": "asc"},
        )
        self._paginate(
            report, job, out, cursor, "issue_comments", f"{repo_path}/issues/comments",
            {"sort": "created", "direction": "asc", **since_params},
        )
        self._paginate(
            report, job, out, cursor, "review_comments", f"{repo_path}/pulls/comments",
            {"sort": "created", "direction": "asc", **since_params},
        )
        self._paginate(report, job, out, cursor, "commits", f"{repo_path}/commits", since_params)

        raw_pulls = {p["number"]: p for p in self._read_staging(out, "pulls") if "number" in p}
        raw_issue_comments = self._read_staging(out, "issue_comments")
        raw_review_comments = self._read_staging(out, "review_comments")
        raw_commits = self._read_staging(out, "commits")

        corpus = self._assemble(job, meta, raw_pulls, raw_issue_comments, raw_review_comments, raw_commits, report)
        corpus_mod.save_corpus(corpus, out)

        validation = corpus_mod.load_corpus(out)
        if validation.errors:
            detail = "; ".join(f"{e.file}:{e.line} {e.message}" for e in validation.errors[:5])
            raise FetchError(f"exported corpus failed validation: {detail}")

        cursor["complete"] = True
        self._save_cursor(out, cursor)
        for endpoint in ENDPOINTS:
            self._staging_path(out, endpoint).unlink(missing_ok=True)

        counts = validation.corpus.counts()
        report.pulls = counts["pulls"]
        report.comments = counts["comments"]
        report.commits = counts["commits"]
        report.contributors = counts["contexts"]
        with open(out / "fetch_report.json", "w", encoding="utf-8") as handle:
            json.dump(report.to_json(), handle, indent=2, sort_keys=True)
            handle.write("\n")
        return report

    def _assemble(
        self,
        job: FetchJob,
        meta: Mapping,
        raw_pulls: Mapping[int, Mapping],
        issue_comments: Iterable[Mapping],
        review_comments: Iterable[Mapping],
        raw_commits: Iterable[Mapping],
        report: FetchReport,
    ) -> corpus_mod.Corpus:
        repo = job.repo_full_name

        members = {
            login
            for item in list(issue_comments) + list(review_comments)
            if (login := self._login(item)) is not None
            and item.get("author_association") in ("OWNER", "MEMBER")
        }
        reviewers_by_pr: dict[int, set[str]] = {}
        for item in review_comments:
            number = self._issue_number(item)
            login = self._login(item)
            if number is not None and login is not None:
                reviewers_by_pr.setdefault(number, set()).add(login)

        comments_by_pr: dict[int, list[tuple[str, str, str]]] = {}
        for item in list(issue_comments) + list(review_comments):
            number = self._issue_number(item)
            login = self._login(item)
            created = item.get("created_at")
            if number is None or login is None or number not in raw_pulls or not created:
                continue
            comments_by_pr.setdefault(number, []).append(
                (login, str(item.get("body") or ""), str(created))
            )

        pulls = []
        for number in sorted(raw_pulls):
            item = raw_pulls[number]
            author = self._login(item) or "ghost"
            merged_by = self._login(item, "merged_by")
            integrators = set(members)
            if merged_by:
                integrators.add(merged_by)
            comments = []
            for login, body, created in comments_by_pr.get(number, []):
                role = corpus_mod.derive_comment_role(
                    login, author, integrators, reviewers_by_pr.get(number, set())
                )
                comments.append(
                    corpus_mod.CommentRecord(
                        author=login,
                        role=role,
                        body=body,
                        created_at=corpus_mod.parse_timestamp(created),
                    )
                )
            merged = bool(item.get("merged_at"))
            closed_at = item.get("closed_at")
            pulls.append(
                corpus_mod.PullRequestRecord(
                    repo_full_name=repo,
                    pr_number=number,
                    author=author,
                    created_at=corpus_mod.parse_timestamp(str(item.get("created_at"))),
                    merged=merged,
                    closed_at=None if not closed_at else corpus_mod.parse_timestamp(str(closed_at)),
                    reopen_count=int(item.get("reopen_count", 0) or 0),
                    comments=tuple(sorted(comments, key=lambda c: c.created_at)),
                )
            )

        commits = []
        commit_authors: dict[str, int] = {}
        for item in raw_commits:
            login = self._login(item, "author") or self._login(item, "committer")
            date = (((item.get("commit") or {}).get("author")) or {}).get("date")
            if login is None or not date:
                continue
            commits.append(
                corpus_mod.CommitEvent(
                    repo_full_name=repo,
                    author=login,
                    committed_at=corpus_mod.parse_timestamp(str(date)),
                )
            )
            commit_authors[login] = commit_authors.get(login, 0) + 1

        authors = sorted(
            {p.author for p in pulls}
            | {c.author for p in pulls for c in p.comments}
            | set(commit_authors)
        )
        total_commits = sum(commit_authors.values())
        contexts = []
        for author in authors:
            profile = self._get(report, job, f"/users/{author}").json()
            followers = profile.get("followers", 0)
            contexts.append(
                corpus_mod.ContributorContext(
                    repo_full_name=repo,
                    author=author,
                    core_member=author in members,
                    contrib_rate_author=(
                        commit_authors.get(author, 0) / total_commits if total_commits else 0.0
                    ),
                    followers=int(followers) if isinstance(followers, int) else 0,
                    # Single-repo exports cannot observe these; see module docs.
                    num_languages=1,
                    contrib_follow_integrator=False,
                    social_strength=0.0,
                )
            )

        repos = [
            corpus_mod.RepoMeta(
                repo_full_name=repo,
                stars=int(meta.get("stargazers_count", 0) or 0),
                category_labels=frozenset(),
                pr_count=len(pulls),
                repo_size=corpus_mod.repo_size_for(len(pulls)),
            )
        ]
        return corpus_mod.Corpus(pulls=pulls, commits=commits, contexts=contexts, repos=repos)


def fetch_repository(job: FetchJob, fetcher: GitHubFetcher | None = None) -> FetchReport:
    """Convenience wrapper used by the CLI."""
    return (fetcher or GitHubFetcher()).fetch_repository(job)
