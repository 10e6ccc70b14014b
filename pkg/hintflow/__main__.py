from hintflow.cli import main

main()
