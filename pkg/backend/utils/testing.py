"""Script-mode runner for the test_*.py modules"""
import sys
import traceback
from typing import Any, Callable, Dict


def expect_error(exc_type, fn: Callable, *args, **kwargs):
    """Call fn and return the raised exception; fail if it raises nothing or something else"""
    try:
        fn(*args, **kwargs)
    except exc_type as e:
        return e
    raise AssertionError(f"{getattr(fn, '__name__', fn)} did not raise {exc_type.__name__}")


def run_test_functions(namespace: Dict[str, Any]) -> None:
    tests = [(name, obj) for name, obj in namespace.items() if name.startswith("test_") and callable(obj)]
    print(f"🧪 Running {len(tests)} tests...")
    failed = 0
    for name, fn in tests:
        try:
            fn()
            print(f"   ✅ {name}")
        except Exception as e:
            failed += 1
            print(f"   ❌ {name}: {e}")
            traceback.print_exc()
    print(f"\n{len(tests) - failed} passed, {failed} failed")
    sys.exit(1 if failed else 0)
