"""Script runner shared by the test modules: `python test_moments.py` runs every test in the file."""

import inspect


def run_all_tests(namespace, title: str) -> bool:
    """Run every argument-free test_* function of a module namespace"""
    print(f"🚀 Starting {title}")
    print("=" * 50)

    tests = [obj for name, obj in namespace.items()
             if name.startswith("test_") and callable(obj) and not inspect.signature(obj).parameters]
    passed = 0
    total = len(tests)

    for test in tests:
        try:
            test()
            passed += 1
            print(f"✅ {test.__name__}")
        except Exception as e:
            print(f"❌ Test {test.__name__} failed with exception: {e!r}")

    print("\n" + "=" * 50)
    print(f"📈 Test Results: {passed}/{total} tests passed")
    if passed == total:
        print("🎉 All tests passed!")
    else:
        print("⚠️ Some tests failed. Please check the errors above.")
    return passed == total
