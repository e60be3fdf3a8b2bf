import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from rdcdyn.fetch import (FetchError, NetworkDisabled, StructureNotFound, fetch_structure,
                         validate_accession)
from rdcdyn.structure import ideal_helix, parse_pdb, write_pdb

PDB_TEXT = write_pdb(ideal_helix(12))


class _Handler(BaseHTTPRequestHandler):
    hits: list = []

    def do_GET(self):
        _Handler.hits.append(self.path)
        if self.path.endswith("/1ABC.pdb"):
            body = PDB_TEXT.encode()
            self.send_response(200)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)
        elif self.path.endswith("/5ERR.pdb"):
            self.send_error(500)
        else:
            self.send_error(404)

    def log_message(self, *args):
        pass


@pytest.fixture
def server():
    _Handler.hits = []
    httpd = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
    t = threading.Thread(target=httpd.serve_forever, daemon=True)
    t.start()
    yield f"http://127.0.0.1:{httpd.server_address[1]}/files/"
    httpd.shutdown()
    httpd.server_close()


def test_download_and_cache(server, tmp_path):
    text = fetch_structure("1abc", base_url=server, cache=tmp_path)
    assert len(parse_pdb(text)) == 12
    assert (tmp_path / "1ABC.pdb").read_text() == text
    assert _Handler.hits == ["/files/1ABC.pdb"]
    again = fetch_structure("1ABC", base_url=server, cache=tmp_path)
    assert again == text and len(_Handler.hits) == 1


def test_not_found_is_typed(server, tmp_path):
    with pytest.raises(StructureNotFound):
        fetch_structure("9ZZZ", base_url=server, cache=tmp_path)
    assert not any(tmp_path.iterdir())


def test_server_error_is_not_not_found(server, tmp_path):
    with pytest.raises(FetchError) as info:
        fetch_structure("5ERR", base_url=server, cache=tmp_path)
    assert not isinstance(info.value, StructureNotFound)


def test_network_failure(tmp_path):
    with pytest.raises(FetchError) as info:
        fetch_structure("1ABC", base_url="http://127.0.0.1:9/", cache=tmp_path, timeout=2)
    assert not isinstance(info.value, StructureNotFound)


def test_malformed_id_rejected_before_network(server, tmp_path):
    for bad in ("1A", "ABCD", "1ABCD", ""):
        with pytest.raises(ValueError):
            fetch_structure(bad, base_url=server, cache=tmp_path)
    assert _Handler.hits == []
    assert validate_accession("2yt4") == "2YT4"


def test_no_network(server, tmp_path, monkeypatch):
    with pytest.raises(NetworkDisabled):
        fetch_structure("1ABC", base_url=server, cache=tmp_path, no_network=True)
    monkeypatch.setenv("RDCDYN_NO_NETWORK", "1")
    with pytest.raises(NetworkDisabled):
        fetch_structure("1ABC", base_url=server, cache=tmp_path)
    (tmp_path / "1ABC.pdb").write_text(PDB_TEXT)
    assert fetch_structure("1ABC", base_url=server, cache=tmp_path) == PDB_TEXT
    assert _Handler.hits == []


def test_cache_env(server, tmp_path, monkeypatch):
    monkeypatch.setenv("RDCDYN_CACHE", str(tmp_path / "c"))
    fetch_structure("1ABC", base_url=server)
    assert (tmp_path / "c" / "1ABC.pdb").exists()


def test_concurrent_fetches(server, tmp_path):
    out = []
    threads = [threading.Thread(target=lambda: out.append(fetch_structure("1ABC", base_url=server,
                                                                          cache=tmp_path)))
               for _ in range(6)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert out == [PDB_TEXT] * 6
    assert [p.name for p in tmp_path.iterdir()] == ["1ABC.pdb"]


@pytest.mark.network
@pytest.mark.skipif("not config.getoption('--run-network', default=False)")
def test_live_entry(tmp_path):
    assert len(parse_pdb(fetch_structure("1A1Z", cache=tmp_path), chain="A")) == 83
